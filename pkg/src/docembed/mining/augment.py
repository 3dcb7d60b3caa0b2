"""Triplet augmentation into short- and long-context training rows.

Each document triplet (anchor, positive, negative) expands into up to four
row types pairing short anchors (title, incoming anchor text) with long
contexts (body, title+body). The positive and negative of a row are always
built from the same components, so the contrastive objective cannot latch
onto length differences. Non-English rows can additionally have their
positive and negative translated; those towers are flagged so the trainer
can stop gradients through possibly-poor translations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from docembed.aux_embed import EmbedTables, embed_text
from docembed.corpus import Document

SEPARATOR = "[SEP]"
ANCHOR_TEXT_MIN_SIMILARITY = 0.5


class AugType(enum.Enum):
    TITLE_BODY = "title_body"
    ANCHOR_TITLE_BODY = "anchor_title_body"
    TITLE_POS_BODY = "title_pos_body"
    FULL_FULL = "full_full"


@dataclass
class AugmentedTriplet:
    anchor_text: str
    positive_text: str
    negative_text: str
    aug_type: AugType
    positive_translated: bool = False
    negative_translated: bool = False
    language: str = "en"


def title_body(doc: Document) -> str:
    return f"{doc.title} {SEPARATOR} {doc.body}"


def anchor_text_qualifies(text: str, doc: Document, tables: EmbedTables) -> bool:
    """Incoming anchor texts are noisy; require auxiliary-text-embedding
    similarity with the document title before using one as an anchor."""
    text_emb = embed_text("anchor", text, tables)
    title_emb = embed_text(doc.id, doc.title, tables)
    if text_emb is None or title_emb is None:
        return False
    a, b = text_emb.vector, title_emb.vector
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return False
    return float(a @ b / denom) >= ANCHOR_TEXT_MIN_SIMILARITY


def augment(
    anchor: Document,
    positive: Document,
    negative: Document,
    tables: EmbedTables | None = None,
) -> list[AugmentedTriplet]:
    """Expand one document triplet into augmented training rows.

    Rows referencing an empty body are skipped. The anchor-text row is
    emitted once per qualifying incoming anchor text and requires embed
    tables for the similarity check.
    """
    language = anchor.language
    rows: list[AugmentedTriplet] = []
    if anchor.body and negative.body:
        rows.append(
            AugmentedTriplet(anchor.title, anchor.body, negative.body, AugType.TITLE_BODY, language=language)
        )
        if tables is not None:
            for text in anchor.anchor_texts:
                if anchor_text_qualifies(text, anchor, tables):
                    rows.append(
                        AugmentedTriplet(
                            text,
                            title_body(anchor),
                            title_body(negative),
                            AugType.ANCHOR_TITLE_BODY,
                            language=language,
                        )
                    )
    if positive.body and negative.body:
        rows.append(
            AugmentedTriplet(
                anchor.title,
                title_body(positive),
                title_body(negative),
                AugType.TITLE_POS_BODY,
                language=language,
            )
        )
        if anchor.body:
            rows.append(
                AugmentedTriplet(
                    title_body(anchor),
                    title_body(positive),
                    title_body(negative),
                    AugType.FULL_FULL,
                    language=language,
                )
            )
    return rows


def primary_language(tag: str) -> str:
    return tag.split("-")[0].lower()


def translate_augment(triplet: AugmentedTriplet, translator) -> AugmentedTriplet:
    """Translate positive and negative into English for cross-lingual rows.

    English rows pass through untouched. On translator failure the original
    row is kept with the translation flags unset.
    """
    if primary_language(triplet.language) == "en":
        return triplet
    try:
        positive = translator(triplet.positive_text)
        negative = translator(triplet.negative_text)
    except Exception:
        return triplet
    return AugmentedTriplet(
        anchor_text=triplet.anchor_text,
        positive_text=positive,
        negative_text=negative,
        aug_type=triplet.aug_type,
        positive_translated=True,
        negative_translated=True,
        language=triplet.language,
    )
