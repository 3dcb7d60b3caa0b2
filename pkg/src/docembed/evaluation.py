"""Frozen-embedding evaluation: similarity, clustering, retrieval, probing."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator

from docembed._validation import check_array
from docembed.cluster import KMeans
from docembed.linear_model import SoftmaxRegression


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(pred, gold) -> float:
    """Rank correlation with average ranks for ties."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape or pred.ndim != 1 or len(pred) < 2:
        raise ValueError("pred and gold must be equal-length vectors of size >= 2")
    if np.all(pred == pred[0]) or np.all(gold == gold[0]):
        raise ValueError("rank correlation undefined for a constant input")
    rp = _average_ranks(pred)
    rg = _average_ranks(gold)
    rp -= rp.mean()
    rg -= rg.mean()
    return float(rp @ rg / np.sqrt((rp @ rp) * (rg @ rg)))


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two partitions of one set."""
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise ValueError("partitions must label the same items")
    _, a_idx = np.unique(labels_a, return_inverse=True)
    _, b_idx = np.unique(labels_b, return_inverse=True)
    contingency = np.zeros((a_idx.max() + 1, b_idx.max() + 1))
    np.add.at(contingency, (a_idx, b_idx), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(contingency).sum()
    sum_a = comb2(contingency.sum(axis=1)).sum()
    sum_b = comb2(contingency.sum(axis=0)).sum()
    total = comb2(len(labels_a))
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 0.0
    return float((sum_cells - expected) / (max_index - expected))


def kmeans_ari(embeddings, true_labels, k: int, seed: int = 0, restarts: int = 10) -> float:
    """Cluster embeddings with k-means and score against the true labels."""
    X = check_array(embeddings, "embeddings")
    true_labels = np.asarray(true_labels)
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} points, got {X.shape[0]}")
    model = KMeans(n_clusters=k, n_init=restarts, seed=seed).fit(X)
    return adjusted_rand_index(true_labels, model.labels_)


def average_precision(ranked_ids, relevant: set, k: int) -> float:
    """AP over the top-k cutoff, denominator min(|relevant|, k)."""
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    hits = 0
    score = 0.0
    for rank, doc_id in enumerate(ranked_ids[:k], start=1):
        if doc_id in relevant:
            hits += 1
            score += hits / rank
    return score / min(len(relevant), k)


def mean_average_precision(queries, corpus_ids, corpus_embeddings, k: int = 8) -> float:
    """Mean AP@k over (query embedding, relevant id set) pairs.

    The corpus is ranked by cosine similarity per query; ties break by
    ascending document id for reproducibility.
    """
    corpus_ids = np.asarray(corpus_ids)
    X = check_array(corpus_embeddings, "corpus_embeddings")
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("corpus contains a zero-norm embedding")
    Xn = X / norms
    ap_values = []
    for query, relevant in queries:
        q = np.asarray(query, dtype=np.float64)
        qn = np.linalg.norm(q)
        if qn == 0:
            raise ValueError("zero-norm query embedding")
        scores = Xn @ (q / qn)
        order = np.lexsort((corpus_ids, -scores))
        ap_values.append(average_precision([corpus_ids[i] for i in order], set(relevant), k))
    return float(np.mean(ap_values))


class LinearProbe(BaseEstimator):
    """Multinomial logistic probe trained on frozen embeddings."""

    def __init__(self, l2=1e-3, lr=0.5, n_iters=500, seed=0):
        self.l2 = l2
        self.lr = lr
        self.n_iters = n_iters
        self.seed = seed

    def fit(self, embeddings, classes):
        X = check_array(embeddings, "embeddings")
        y = np.asarray(classes)
        self.model_ = SoftmaxRegression(lr=self.lr, n_iters=self.n_iters, l2=self.l2)
        self.model_.fit(X, y)
        return self

    def predict(self, embeddings):
        return self.model_.predict(check_array(embeddings, "embeddings"))

    def score(self, embeddings, classes) -> float:
        y = np.asarray(classes)
        unseen = ~np.isin(y, self.model_.classes_)
        if unseen.any():
            warnings.warn(
                f"{int(unseen.sum())} test rows have classes unseen in training; counted wrong",
                stacklevel=2,
            )
        return float(np.mean(self.predict(embeddings) == y))


def linear_probe(train_embeddings, train_classes, test_embeddings, test_classes, l2=1e-3, seed=0) -> float:
    probe = LinearProbe(l2=l2, seed=seed).fit(train_embeddings, train_classes)
    return probe.score(test_embeddings, test_classes)
