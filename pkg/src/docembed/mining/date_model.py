"""Byline-date prediction from document text.

Time-sensitive articles mention things that pin them to a narrow window,
so a text classifier over date buckets predicts their byline date sharply.
Evergreen content gives the classifier nothing to work with, producing a
near-uniform predicted distribution; the entropy of that distribution is
the signal the pair denoiser runs on.
"""

from __future__ import annotations

import zlib

import numpy as np
from sklearn.base import BaseEstimator

from docembed._validation import check_is_fitted
from docembed.corpus import Document
from docembed.linear_model import SoftmaxRegression

DAYS_PER_MONTH = 30


def hashed_bow(tokens, dim: int) -> np.ndarray:
    """L1-normalized hashed bag-of-words features (stable across runs)."""
    vec = np.zeros(dim)
    for token in tokens:
        vec[zlib.crc32(token.encode("utf-8")) % dim] += 1.0
    total = vec.sum()
    return vec / total if total > 0 else vec


class DateBucketPredictor(BaseEstimator):
    """Softmax regression over equal-width byline-date buckets."""

    def __init__(self, buckets=None, hash_dim=512, lr=1.0, n_iters=300, l2=1e-4):
        self.buckets = buckets  # None: one bucket per ~30 days of date range
        self.hash_dim = hash_dim
        self.lr = lr
        self.n_iters = n_iters
        self.l2 = l2

    def _features(self, doc: Document) -> np.ndarray:
        tokens = doc.title.split() + doc.body.split()
        if not tokens:
            tokens = doc.title.split()
        return hashed_bow(tokens, self.hash_dim)

    def fit(self, docs: list[Document]):
        dates = np.array([doc.byline_date for doc in docs])
        lo, hi = int(dates.min()), int(dates.max())
        if lo == hi:
            raise ValueError("corpus spans a single date; cannot form buckets")
        n_buckets = self.buckets
        if n_buckets is None:
            n_buckets = max(2, round((hi - lo) / DAYS_PER_MONTH))
        if n_buckets < 2:
            raise ValueError("need at least 2 buckets")
        # interior edges of equal-width bins over [lo, hi]
        self.bucket_edges_ = lo + (hi - lo) * np.arange(1, n_buckets) / n_buckets
        self.n_buckets_ = n_buckets
        y = self.bucket_of(dates)
        if len(np.unique(y)) < 2:
            raise ValueError("documents fall in a single date bucket")
        X = np.stack([self._features(doc) for doc in docs])
        self.model_ = SoftmaxRegression(lr=self.lr, n_iters=self.n_iters, l2=self.l2)
        # fit over all bucket labels so absent buckets still get a column
        self.model_.fit(X, y)
        self._class_columns_ = {c: i for i, c in enumerate(self.model_.classes_)}
        return self

    def bucket_of(self, dates):
        check_is_fitted(self, "bucket_edges_")
        return np.searchsorted(self.bucket_edges_, dates, side="right")

    def predict_distribution(self, doc: Document) -> np.ndarray:
        """Probability vector over all buckets (sums to 1)."""
        check_is_fitted(self, "model_")
        probs = self.model_.predict_proba(self._features(doc)[None, :])[0]
        full = np.zeros(self.n_buckets_)
        for cls, col in self._class_columns_.items():
            full[cls] = probs[col]
        return full

    def entropy(self, doc: Document) -> float:
        p = self.predict_distribution(doc)
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())

    def mass_near_true_bucket(self, doc: Document, radius: int = 1) -> float:
        """Predicted probability within +-radius buckets of the true one."""
        p = self.predict_distribution(doc)
        true = int(self.bucket_of(np.array([doc.byline_date]))[0])
        lo = max(0, true - radius)
        return float(p[lo : true + radius + 1].sum())


def train_date_predictor(docs: list[Document], buckets: int, **kwargs) -> DateBucketPredictor:
    return DateBucketPredictor(buckets=buckets, **kwargs).fit(docs)


def predict_date_distribution(model: DateBucketPredictor, doc: Document) -> np.ndarray:
    return model.predict_distribution(doc)
