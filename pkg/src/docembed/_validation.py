"""Input-validation helpers shared across estimators."""

from __future__ import annotations

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


class NumericError(RuntimeError):
    """Raised when a computation produces non-finite values."""


def check_array(X, name="X", ndim=2, dtype=np.float64):
    """Coerce to a contiguous float array and reject non-finite values."""
    arr = np.asarray(X, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_vector(v, name="vector", dim=None):
    arr = check_array(v, name=name, ndim=1)
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    return arr


def check_random_state(seed):
    """Return a numpy Generator for an int seed or pass one through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_is_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )
