"""Document-topic associations mined from publisher hub pages.

A hub page (site sub-directory, feed, ...) aggregates documents that share
a topic. Hub titles matching a topic lexicon label every member document;
unobserved topics count as negatives only when the same publisher uses
them on some hub, which keeps the negatives trustworthy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from docembed._validation import DataError, check_random_state


@dataclass
class HubPage:
    publisher: str
    title: str
    member_doc_ids: list[str]

    def __post_init__(self):
        if not self.member_doc_ids:
            raise DataError(f"hub {self.title!r} of {self.publisher!r} has no members")


@dataclass
class TopicExample:
    doc_id: str
    positives: set[str] = field(default_factory=set)
    negatives: set[str] = field(default_factory=set)

    def __post_init__(self):
        if self.positives & self.negatives:
            raise ValueError(f"doc {self.doc_id}: positive/negative overlap")


def load_hubs(path) -> list[HubPage]:
    hubs = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                obj = json.loads(line)
                hubs.append(
                    HubPage(obj["publisher"], obj["title"], list(obj["member_doc_ids"]))
                )
    return hubs


def load_lexicon(path) -> dict[str, str]:
    """`surface<TAB>topic_id` file; surfaces matched case-insensitively."""
    lexicon = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            surface, _, topic_id = line.partition("\t")
            if not topic_id:
                raise DataError(f"malformed lexicon line: {line!r}")
            lexicon[surface.lower()] = topic_id
    return lexicon


def mine_hub_topics(hubs: list[HubPage], lexicon: dict[str, str]) -> dict[str, set[str]]:
    """Label every member of a hub whose title matches the topic lexicon.

    Hubs with unmatched titles (author pages, date archives, ...) are
    ignored.
    """
    if not lexicon:
        raise ValueError("topic lexicon is empty")
    doc_topics: dict[str, set[str]] = {}
    for hub in hubs:
        topic = lexicon.get(hub.title.lower())
        if topic is None:
            continue
        for doc_id in hub.member_doc_ids:
            doc_topics.setdefault(doc_id, set()).add(topic)
    return doc_topics


def derive_examples(
    doc_topics: dict[str, set[str]],
    hubs: list[HubPage],
    lexicon: dict[str, str],
) -> list[TopicExample]:
    """Turn mined labels into examples with publisher-conditional negatives.

    For each document, negatives are the topics its publisher(s) use on any
    hub, minus the document's own topics. Topics a publisher never uses
    appear in neither set. Documents whose publishers have a single topic
    end up with no negatives.
    """
    publisher_vocab: dict[str, set[str]] = {}
    doc_publishers: dict[str, set[str]] = {}
    for hub in hubs:
        topic = lexicon.get(hub.title.lower())
        if topic is not None:
            publisher_vocab.setdefault(hub.publisher, set()).add(topic)
        for doc_id in hub.member_doc_ids:
            doc_publishers.setdefault(doc_id, set()).add(hub.publisher)

    examples = []
    for doc_id in sorted(doc_publishers):
        positives = set(doc_topics.get(doc_id, set()))
        vocab: set[str] = set()
        for publisher in doc_publishers[doc_id]:
            vocab |= publisher_vocab.get(publisher, set())
        negatives = vocab - positives
        if positives or negatives:
            examples.append(TopicExample(doc_id, positives, negatives))
    return examples


def balance_sample(
    examples: list[TopicExample],
    target_pos_ratio: float = 0.25,
    seed: int = 0,
) -> list[TopicExample]:
    """Down-sample negatives so positives make up ~target_pos_ratio overall.

    Per example the negative budget is |positives| * (1-r)/r with a
    randomized rounding of the fractional part, so the dataset-level ratio
    is hit in expectation. Examples that cannot reach the target (no
    positives, or already at/above the ratio) keep all their labels.
    """
    if not 0.0 < target_pos_ratio < 1.0:
        raise ValueError("target_pos_ratio must be in (0, 1)")
    rng = check_random_state(seed)
    factor = (1.0 - target_pos_ratio) / target_pos_ratio
    out = []
    for example in examples:
        n_pos = len(example.positives)
        negatives = sorted(example.negatives)
        budget = n_pos * factor
        if n_pos == 0 or len(negatives) <= budget:
            out.append(TopicExample(example.doc_id, set(example.positives), set(negatives)))
            continue
        keep = int(budget) + (1 if rng.random() < budget - int(budget) else 0)
        keep = min(keep, len(negatives))
        chosen = rng.choice(len(negatives), size=keep, replace=False) if keep else []
        sampled = {negatives[i] for i in np.sort(chosen)} if keep else set()
        out.append(TopicExample(example.doc_id, set(example.positives), sampled))
    return out


def positive_ratio(examples: list[TopicExample]) -> float:
    pos = sum(len(e.positives) for e in examples)
    total = pos + sum(len(e.negatives) for e in examples)
    return pos / total if total else 0.0


def save_examples(examples: list[TopicExample], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(
                json.dumps(
                    {
                        "doc_id": example.doc_id,
                        "positives": sorted(example.positives),
                        "negatives": sorted(example.negatives),
                    }
                )
                + "\n"
            )


def load_examples(path) -> list[TopicExample]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                obj = json.loads(line)
                out.append(
                    TopicExample(obj["doc_id"], set(obj["positives"]), set(obj["negatives"]))
                )
    return out
