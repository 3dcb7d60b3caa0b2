"""Seeded Lloyd's k-means with k-means++ initialization."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from docembed._validation import check_array, check_is_fitted, check_random_state


def _kmeanspp_init(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = X[rng.integers(n)]
            continue
        centers[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _assign(X, centers):
    d = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * X @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return d.argmin(axis=1), d


def lloyd(X, k, rng, max_iter=10):
    """One seeded k-means run; returns (centers, labels, inertia).

    Runs a fixed number of Lloyd iterations. An emptied cluster is
    re-seeded at the point currently farthest from its assigned center,
    which keeps every run producing exactly k clusters.
    """
    centers = _kmeanspp_init(X, k, rng)
    labels, d = _assign(X, centers)
    for _ in range(max_iter):
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                worst = d[np.arange(len(labels)), labels].argmax()
                centers[j] = X[worst]
        labels, d = _assign(X, centers)
    inertia = float(d[np.arange(len(labels)), labels].sum())
    return centers, labels, inertia


class KMeans(BaseEstimator):
    """Lloyd's algorithm, best of ``n_init`` seeded restarts by inertia."""

    def __init__(self, n_clusters=8, n_init=1, max_iter=10, seed=0):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X):
        X = check_array(X, "X")
        if X.shape[0] < self.n_clusters:
            raise ValueError(
                f"need at least n_clusters={self.n_clusters} points, got {X.shape[0]}"
            )
        rng = check_random_state(self.seed)
        best = None
        for _ in range(self.n_init):
            centers, labels, inertia = lloyd(X, self.n_clusters, rng, self.max_iter)
            if best is None or inertia < best[2]:
                best = (centers, labels, inertia)
        self.cluster_centers_, self.labels_, self.inertia_ = best
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, "X")
        labels, _ = _assign(X, self.cluster_centers_)
        return labels

    def fit_predict(self, X):
        return self.fit(X).labels_
