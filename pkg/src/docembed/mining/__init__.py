from docembed.mining.candidates import (
    CandidatePair,
    PairLabel,
    date_filter,
    generate_candidates,
)
from docembed.mining.date_model import DateBucketPredictor, train_date_predictor
from docembed.mining.denoiser import (
    PAIR_FEATURE_NAMES,
    PairDenoiser,
    apply_denoiser,
    pair_features,
    train_denoiser,
)
from docembed.mining.augment import AugType, AugmentedTriplet, augment, translate_augment
from docembed.mining.pipeline import DocumentTriplet, MiningConfig, mine_triplets

__all__ = [
    "CandidatePair",
    "PairLabel",
    "date_filter",
    "generate_candidates",
    "DateBucketPredictor",
    "train_date_predictor",
    "PAIR_FEATURE_NAMES",
    "PairDenoiser",
    "apply_denoiser",
    "pair_features",
    "train_denoiser",
    "AugType",
    "AugmentedTriplet",
    "augment",
    "translate_augment",
    "DocumentTriplet",
    "MiningConfig",
    "mine_triplets",
]
