"""End-to-end triplet mining: retrieve, filter, denoise, augment."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from docembed.aux_embed import EmbedTables, Space, embed_corpus
from docembed.corpus import Document
from docembed.mining.augment import AugmentedTriplet, AugType, augment, translate_augment
from docembed.mining.candidates import (
    CandidatePair,
    PairLabel,
    date_filter,
    generate_candidates,
)
from docembed.mining.date_model import DateBucketPredictor
from docembed.mining.denoiser import (
    PAIR_FEATURE_NAMES,
    PairDenoiser,
    apply_denoiser,
    pair_features,
)
from docembed.neighbors import InvertedFileIndex, brute_force_topk


@dataclass
class MiningConfig:
    top_k: int = 20
    max_pos_days: int = 1
    min_neg_days: int = 365
    denoiser_threshold: float = 0.5
    max_positives_per_anchor: int = 3
    num_partitions: int = 8
    probes: int = 8
    date_buckets: int | None = None
    seed: int = 0


@dataclass
class DocumentTriplet:
    anchor_id: str
    positive_id: str
    negative_id: str
    positive_delta_days: int
    negative_delta_days: int


def neighbor_lists(
    docs: list[Document],
    tables: EmbedTables,
    config: MiningConfig,
    indices: dict[Space, InvertedFileIndex] | None = None,
) -> dict[Space, dict[str, list]]:
    """Top-k neighbors of every document in every auxiliary space.

    Prebuilt per-space indices are used when supplied; spaces too small to
    fill the configured partitions fall back to the exact scan.
    """
    lists: dict[Space, dict[str, list]] = {}
    for space in Space:
        embeddings = embed_corpus(docs, space, tables)
        if not embeddings:
            continue
        per_anchor: dict[str, list] = {}
        index = (indices or {}).get(space)
        if index is None and len(embeddings) >= config.num_partitions:
            index = InvertedFileIndex(
                num_partitions=config.num_partitions,
                probes=config.probes,
                seed=config.seed,
            ).fit(embeddings)
        if index is not None:
            for emb in embeddings:
                per_anchor[emb.doc_id] = index.query_topk(
                    emb.vector, config.top_k, exclude_id=emb.doc_id
                )
        else:
            for emb in embeddings:
                per_anchor[emb.doc_id] = brute_force_topk(
                    embeddings, emb.vector, config.top_k, exclude_id=emb.doc_id
                )
        lists[space] = per_anchor
    return lists


def _max_sim(pair: CandidatePair) -> float:
    return max(pair.sims.values())


def build_denoiser_training_set(
    labeled_pairs: list[tuple[str, str, bool]],
    candidates: list[CandidatePair],
    docs_by_id: dict[str, Document],
    date_model: DateBucketPredictor,
):
    """Features/labels for labeled (anchor, neighbor, is_true_negative) ids.

    Labels referring to pairs that were never retrieved as candidates are
    skipped: their similarity features do not exist.
    """
    by_ids = {(p.anchor_id, p.neighbor_id): p for p in candidates}
    features, labels = [], []
    for anchor_id, neighbor_id, is_true_negative in labeled_pairs:
        pair = by_ids.get((anchor_id, neighbor_id)) or by_ids.get((neighbor_id, anchor_id))
        if pair is None:
            continue
        features.append(
            pair_features(pair, docs_by_id[pair.anchor_id], docs_by_id[pair.neighbor_id], date_model)
        )
        labels.append(bool(is_true_negative))
    return np.array(features), np.array(labels, dtype=float)


def mine_triplets(
    docs: list[Document],
    tables: EmbedTables,
    labeled_pairs: list[tuple[str, str, bool]],
    config: MiningConfig | None = None,
    translator=None,
    indices: dict[Space, InvertedFileIndex] | None = None,
) -> tuple[list[DocumentTriplet], list[AugmentedTriplet]]:
    """Run the full mining pipeline over a validated corpus.

    Returns the mined document triplets (for auditing and held-out
    evaluation) alongside the augmented training rows. Anchors keep at most
    ``max_positives_per_anchor`` positives ranked by best similarity; each
    (anchor, positive) is paired with one denoised hard negative,
    round-robin over the anchor's negatives ranked the same way.
    """
    config = config or MiningConfig()
    docs_by_id = {doc.id: doc for doc in docs}

    lists = neighbor_lists(docs, tables, config, indices=indices)
    candidates = generate_candidates(docs, lists)
    labeled = [
        (pair, date_filter(pair, config.max_pos_days, config.min_neg_days))
        for pair in candidates
    ]
    labeled = [(p, l) for p, l in labeled if l is not PairLabel.DISCARD]

    date_model = DateBucketPredictor(buckets=config.date_buckets).fit(docs)

    features, labels = build_denoiser_training_set(
        labeled_pairs, candidates, docs_by_id, date_model
    )
    denoiser = PairDenoiser().fit(features, labels)
    pair_feats = np.array(
        [
            pair_features(pair, docs_by_id[pair.anchor_id], docs_by_id[pair.neighbor_id], date_model)
            for pair, _ in labeled
        ]
    )
    if not len(labeled):
        pair_feats = np.zeros((0, len(PAIR_FEATURE_NAMES)))
    kept = apply_denoiser(
        denoiser,
        [p for p, _ in labeled],
        [l for _, l in labeled],
        pair_feats,
        config.denoiser_threshold,
    )

    positives: dict[str, list[CandidatePair]] = {}
    negatives: dict[str, list[CandidatePair]] = {}
    for pair, label in kept:
        bucket = positives if label is PairLabel.POSITIVE else negatives
        bucket.setdefault(pair.anchor_id, []).append(pair)

    triplets: list[DocumentTriplet] = []
    for anchor_id in sorted(positives):
        if anchor_id not in negatives:
            continue
        pos = sorted(positives[anchor_id], key=lambda p: (-_max_sim(p), p.neighbor_id))
        pos = pos[: config.max_positives_per_anchor]
        neg = sorted(negatives[anchor_id], key=lambda p: (-_max_sim(p), p.neighbor_id))
        for i, p in enumerate(pos):
            n = neg[i % len(neg)]
            triplets.append(
                DocumentTriplet(
                    anchor_id=anchor_id,
                    positive_id=p.neighbor_id,
                    negative_id=n.neighbor_id,
                    positive_delta_days=p.date_delta_days,
                    negative_delta_days=n.date_delta_days,
                )
            )

    augmented = augment_document_triplets(triplets, docs_by_id, tables, translator)
    return triplets, augmented


def augment_document_triplets(
    triplets: list[DocumentTriplet],
    docs_by_id: dict[str, Document],
    tables: EmbedTables | None = None,
    translator=None,
) -> list[AugmentedTriplet]:
    augmented: list[AugmentedTriplet] = []
    for triplet in triplets:
        rows = augment(
            docs_by_id[triplet.anchor_id],
            docs_by_id[triplet.positive_id],
            docs_by_id[triplet.negative_id],
            tables,
        )
        if translator is not None:
            rows = [translate_augment(row, translator) for row in rows]
        augmented.extend(rows)
    return augmented


def save_document_triplets(triplets: list[DocumentTriplet], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for t in triplets:
            handle.write(json.dumps(t.__dict__) + "\n")


def load_document_triplets(path) -> list[DocumentTriplet]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                out.append(DocumentTriplet(**json.loads(line)))
    return out


def save_augmented_triplets(triplets: list[AugmentedTriplet], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for t in triplets:
            record = dict(t.__dict__)
            record["aug_type"] = t.aug_type.value
            handle.write(json.dumps(record) + "\n")


def load_augmented_triplets(path) -> list[AugmentedTriplet]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                record["aug_type"] = AugType(record["aug_type"])
                out.append(AugmentedTriplet(**record))
    return out
