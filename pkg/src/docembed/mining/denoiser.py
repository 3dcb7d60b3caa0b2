"""Logistic-regression denoiser for candidate negative pairs.

Date filtering alone mislabels evergreen content: two articles about a
perennial topic can sit a year apart yet describe the same thing. The
denoiser scores each candidate negative from the pair's embedding
similarities and both documents' date-predictability, and only pairs
confidently judged true negatives survive.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from docembed._validation import check_is_fitted
from docembed.corpus import Document
from docembed.linear_model import LogisticRegressionGD
from docembed.mining.candidates import CandidatePair, PairLabel
from docembed.mining.date_model import DateBucketPredictor

# Fixed feature contract, in order.
PAIR_FEATURE_NAMES = (
    "max_similarity",
    "mean_similarity",
    "anchor_date_entropy",
    "neighbor_date_entropy",
    "anchor_mass_near_true_bucket",
    "neighbor_mass_near_true_bucket",
    "date_delta_years",
)

MIN_TRAINING_PAIRS = 50


def pair_features(
    pair: CandidatePair,
    anchor: Document,
    neighbor: Document,
    date_model: DateBucketPredictor,
) -> np.ndarray:
    sims = list(pair.sims.values())
    return np.array(
        [
            max(sims),
            float(np.mean(sims)),
            date_model.entropy(anchor),
            date_model.entropy(neighbor),
            date_model.mass_near_true_bucket(anchor),
            date_model.mass_near_true_bucket(neighbor),
            pair.date_delta_days / 365.0,
        ]
    )


class PairDenoiser(BaseEstimator):
    """Predicts the probability that a candidate negative is a true negative."""

    def __init__(self, lr=0.5, n_iters=500, l2=1e-4):
        self.lr = lr
        self.n_iters = n_iters
        self.l2 = l2

    def fit(self, features, is_true_negative):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(is_true_negative, dtype=np.float64)
        if len(features) < MIN_TRAINING_PAIRS:
            raise ValueError(
                f"need at least {MIN_TRAINING_PAIRS} labeled pairs, got {len(features)}"
            )
        if len(np.unique(labels)) < 2:
            raise ValueError("need both true-negative and false-negative examples")
        self.model_ = LogisticRegressionGD(lr=self.lr, n_iters=self.n_iters, l2=self.l2)
        self.model_.fit(features, labels)
        return self

    def predict_proba(self, features) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.predict_proba(np.asarray(features, dtype=np.float64))

    def score(self, features, is_true_negative) -> float:
        check_is_fitted(self, "model_")
        return self.model_.score(features, np.asarray(is_true_negative))


def train_denoiser(features, is_true_negative, **kwargs) -> PairDenoiser:
    return PairDenoiser(**kwargs).fit(features, is_true_negative)


def apply_denoiser(
    denoiser: PairDenoiser,
    pairs: list[CandidatePair],
    labels: list[PairLabel],
    features,
    threshold: float = 0.5,
) -> list[tuple[CandidatePair, PairLabel]]:
    """Drop negatives whose true-negative probability falls below threshold.

    Positive pairs pass unchanged; discarded pairs never reach this stage.
    """
    features = np.asarray(features, dtype=np.float64)
    if len(features) != len(pairs) or len(labels) != len(pairs):
        raise ValueError("pairs, labels and features must align")
    probs = denoiser.predict_proba(features) if len(pairs) else np.zeros(0)
    kept = []
    for pair, label, prob in zip(pairs, labels, probs):
        if label is PairLabel.POSITIVE or prob >= threshold:
            kept.append((pair, label))
    return kept
