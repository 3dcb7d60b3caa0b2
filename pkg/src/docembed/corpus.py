"""Corpus ingestion, validation, cleaning and deduplication."""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field

from docembed._validation import DataError

_EPOCH = datetime.date(1970, 1, 1).toordinal()

DEFAULT_MIN_WORDS = 100


@dataclass
class Document:
    """One news-style article with the metadata the pipeline relies on."""

    id: str
    title: str
    body: str
    anchor_texts: list[str] = field(default_factory=list)
    byline_date: int = 0  # days since 1970-01-01
    publisher: str = ""
    language: str = "en"  # BCP-47
    entity_ids: list[str] = field(default_factory=list)
    image_hash: str | None = None  # hex string, 4 bits per digit


@dataclass
class CorpusStats:
    """Per-language document counts over the retained corpus."""

    per_language: dict[str, int] = field(default_factory=dict)
    total: int = 0
    rejected: int = 0


def date_to_days(iso_date: str) -> int:
    return datetime.date.fromisoformat(iso_date).toordinal() - _EPOCH


def days_to_date(days: int) -> str:
    return datetime.date.fromordinal(days + _EPOCH).isoformat()


def word_count(text: str) -> int:
    return len(text.split())


def _parse_record(obj: dict) -> Document:
    byline_date = obj["byline_date"]
    if byline_date is None or byline_date == "":
        raise KeyError("byline_date")
    publisher = obj["publisher"]
    if not publisher:
        raise KeyError("publisher")
    return Document(
        id=str(obj["id"]),
        title=str(obj["title"]),
        body=str(obj["body"]),
        anchor_texts=[str(a) for a in obj.get("anchor_texts", [])],
        byline_date=date_to_days(str(byline_date)),
        publisher=str(publisher),
        language=str(obj.get("language", "en")),
        entity_ids=[str(e) for e in obj.get("entity_ids", [])],
        image_hash=obj.get("image_hash") or None,
    )


def ingest(path, min_words: int = DEFAULT_MIN_WORDS) -> tuple[list[Document], CorpusStats]:
    """Read a JSON-lines corpus file, keeping only valid, text-rich documents.

    A record is retained when it parses, carries a byline date and a
    publisher, and its body has at least ``min_words`` whitespace-delimited
    words. Malformed records are skipped and counted; an unreadable file is
    fatal. Output is sorted by document id so that ingestion is
    deterministic regardless of sharding.
    """
    if min_words < 0:
        raise ValueError("min_words must be non-negative")
    docs: list[Document] = []
    rejected = 0
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    with handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                doc = _parse_record(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                rejected += 1
                continue
            if word_count(doc.body) < min_words:
                rejected += 1
                continue
            docs.append(doc)
    docs.sort(key=lambda d: d.id)
    stats = CorpusStats(rejected=rejected)
    for doc in docs:
        stats.per_language[doc.language] = stats.per_language.get(doc.language, 0) + 1
    stats.total = len(docs)
    return docs, stats


def body_fingerprint(body: str) -> str:
    normalized = " ".join(body.lower().split())
    return hashlib.sha1(normalized.encode("utf-8")).hexdigest()


def dedup(docs: list[Document]) -> list[Document]:
    """Keep one document per exact body fingerprint.

    The fingerprint is a hash of the lowercased, whitespace-collapsed body.
    Among duplicates the earliest byline date wins; remaining ties go to
    the smallest id. Idempotent, output sorted by id.
    """
    best: dict[str, Document] = {}
    for doc in docs:
        key = body_fingerprint(doc.body)
        kept = best.get(key)
        if kept is None or (doc.byline_date, doc.id) < (kept.byline_date, kept.id):
            best[key] = doc
    return sorted(best.values(), key=lambda d: d.id)


def document_to_record(doc: Document) -> dict:
    return {
        "id": doc.id,
        "title": doc.title,
        "body": doc.body,
        "anchor_texts": list(doc.anchor_texts),
        "byline_date": days_to_date(doc.byline_date),
        "publisher": doc.publisher,
        "language": doc.language,
        "entity_ids": list(doc.entity_ids),
        "image_hash": doc.image_hash,
    }


def write_corpus(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps(document_to_record(doc)) + "\n")
