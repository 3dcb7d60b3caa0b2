"""Approximate nearest-neighbor retrieval with an inverted-file index.

A coarse k-means quantizer partitions the (L2-normalized) vectors; a query
scans only its nearest partitions exhaustively. ``probes`` trades recall
against scan cost; with ``probes == num_partitions`` the result equals the
exact brute-force ranking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from docembed._validation import check_is_fitted, check_random_state, check_vector
from docembed.aux_embed import AuxEmbedding
from docembed.cluster import lloyd

QUANTIZER_ITERATIONS = 10


@dataclass
class IndexConfig:
    num_partitions: int
    probes: int
    metric: str = "cosine"
    seed: int = 0

    def __post_init__(self):
        if self.num_partitions < 1:
            raise ValueError("num_partitions must be positive")
        if not 1 <= self.probes <= self.num_partitions:
            raise ValueError("probes must be in [1, num_partitions]")
        if self.metric != "cosine":
            raise ValueError(f"unsupported metric {self.metric!r}")


@dataclass
class Neighbor:
    doc_id: str
    score: float  # cosine similarity


def _normalize_rows(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot index zero-norm vectors under cosine metric")
    return X / norms


def _rank_hits(ids, scores, k, exclude_id):
    """Top-k by descending score; ties broken by ascending doc id."""
    if exclude_id is not None:
        keep = ids != exclude_id
        ids, scores = ids[keep], scores[keep]
    if len(ids) == 0:
        return []
    order = np.lexsort((ids, -scores))[:k]
    return [Neighbor(str(ids[i]), float(scores[i])) for i in order]


class InvertedFileIndex(BaseEstimator):
    """Inverted-file cosine index over one auxiliary embedding space."""

    def __init__(self, num_partitions=16, probes=4, metric="cosine", seed=0):
        self.num_partitions = num_partitions
        self.probes = probes
        self.metric = metric
        self.seed = seed

    def _config(self):
        return IndexConfig(self.num_partitions, self.probes, self.metric, self.seed)

    def fit(self, embeddings: list[AuxEmbedding]):
        config = self._config()
        if len(embeddings) < config.num_partitions:
            raise ValueError(
                f"{len(embeddings)} points cannot fill {config.num_partitions} "
                "partitions; use a smaller num_partitions"
            )
        dims = {e.vector.shape[0] for e in embeddings}
        spaces = {e.space for e in embeddings}
        if len(dims) != 1 or len(spaces) != 1:
            raise ValueError("all embeddings must share one space and dimension")
        self.ids_ = np.array([e.doc_id for e in embeddings])
        X = np.stack([np.asarray(e.vector, dtype=np.float64) for e in embeddings])
        self.matrix_ = _normalize_rows(X)
        rng = check_random_state(config.seed)
        self.centroids_, self.assignments_, _ = lloyd(
            self.matrix_, config.num_partitions, rng, max_iter=QUANTIZER_ITERATIONS
        )
        self.partitions_ = [
            np.where(self.assignments_ == j)[0] for j in range(config.num_partitions)
        ]
        return self

    @property
    def dimension_(self):
        check_is_fitted(self, "matrix_")
        return self.matrix_.shape[1]

    def query_topk(self, query, k: int, exclude_id: str | None = None) -> list[Neighbor]:
        """Scan the ``probes`` nearest partitions and rank the hits by cosine."""
        check_is_fitted(self, "matrix_")
        if k < 1:
            raise ValueError("k must be positive")
        if len(self.ids_) == 0:
            return []
        q = check_vector(query, "query", dim=self.matrix_.shape[1])
        norm = np.linalg.norm(q)
        if norm == 0:
            raise ValueError("cannot query with a zero-norm vector")
        q = q / norm
        cd = np.sum((self.centroids_ - q) ** 2, axis=1)
        probe = np.argsort(cd, kind="stable")[: self.probes]
        rows = np.concatenate([self.partitions_[j] for j in probe])
        scores = self.matrix_[rows] @ q
        return _rank_hits(self.ids_[rows], scores, k, exclude_id)

    def save(self, path) -> None:
        check_is_fitted(self, "matrix_")
        np.savez(
            path,
            dimension=self.matrix_.shape[1],
            num_partitions=self.num_partitions,
            probes=self.probes,
            seed=self.seed,
            metric=self.metric,
            ids=self.ids_,
            matrix=self.matrix_,
            centroids=self.centroids_,
            assignments=self.assignments_,
        )

    @classmethod
    def load(cls, path) -> "InvertedFileIndex":
        data = np.load(path, allow_pickle=False)
        index = cls(
            num_partitions=int(data["num_partitions"]),
            probes=int(data["probes"]),
            metric=str(data["metric"]),
            seed=int(data["seed"]),
        )
        index.ids_ = data["ids"]
        index.matrix_ = data["matrix"]
        index.centroids_ = data["centroids"]
        index.assignments_ = data["assignments"]
        index.partitions_ = [
            np.where(index.assignments_ == j)[0] for j in range(index.num_partitions)
        ]
        return index


def brute_force_topk(
    embeddings: list[AuxEmbedding], query, k: int, exclude_id: str | None = None
) -> list[Neighbor]:
    """Exact top-k by cosine over every embedding; the test oracle."""
    if not embeddings:
        return []
    ids = np.array([e.doc_id for e in embeddings])
    X = _normalize_rows(np.stack([np.asarray(e.vector, dtype=np.float64) for e in embeddings]))
    q = check_vector(query, "query", dim=X.shape[1])
    norm = np.linalg.norm(q)
    if norm == 0:
        raise ValueError("cannot query with a zero-norm vector")
    scores = X @ (q / norm)
    return _rank_hits(ids, scores, k, exclude_id)
