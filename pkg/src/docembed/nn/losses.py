"""Contrastive and multi-label objectives with exact gradients.

The contrastive loss treats each anchor's positive as the correct class of
a softmax over every positive and negative in the (possibly cross-shard)
batch, scaled by a temperature. The classification loss is a per-topic
binary cross-entropy restricted to the topics actually labeled for a
document. Both use max-subtraction / softplus identities so saturated
inputs stay finite.
"""

from __future__ import annotations

import numpy as np

MASK_NEG = -1e30


def _check_nonzero_rows(x, name):
    norms = np.linalg.norm(x, axis=-1)
    if np.any(norms == 0):
        raise ValueError(f"{name} contains a zero-norm vector")


def _log_softmax_nll(logits, target_col):
    """Per-row negative log softmax probability of the target column."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.shape[0])
    return log_z - shifted[rows, target_col]


def infonce_loss(a, p, n, Z=(), tau: float = 0.05) -> float:
    """Scalar contrastive loss for one triplet plus extra negatives Z.

    The denominator runs over {p, n} and every vector of Z; the positive is
    the target class.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    a = np.asarray(a, dtype=np.float64)
    candidates = [np.asarray(p, dtype=np.float64), np.asarray(n, dtype=np.float64)]
    candidates.extend(np.asarray(z, dtype=np.float64) for z in Z)
    C = np.stack(candidates)
    _check_nonzero_rows(a[None, :], "anchor")
    _check_nonzero_rows(C, "candidates")
    logits = (C @ a / tau)[None, :]
    return float(_log_softmax_nll(logits, np.array([0]))[0])


def info_nce_batch(
    anchors,
    positives,
    negatives,
    tau: float = 0.05,
    shard_size: int | None = None,
    cross_shard: bool = True,
):
    """Batched contrastive loss with in-batch negatives; returns gradients.

    For anchor i the candidate set is every positive and negative of the
    batch (its own positive is the target). With ``cross_shard`` disabled,
    candidates are restricted to anchor i's shard of ``shard_size``
    consecutive rows, emulating training without cross-shard gathering.

    Returns (loss, d_anchors, d_positives, d_negatives); the loss is the
    mean over anchors and the gradients are exact, including the paths
    through other anchors' denominators.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    A = np.asarray(anchors, dtype=np.float64)
    P = np.asarray(positives, dtype=np.float64)
    N = np.asarray(negatives, dtype=np.float64)
    for name, x in (("anchors", A), ("positives", P), ("negatives", N)):
        _check_nonzero_rows(x, name)
    b = A.shape[0]
    C = np.concatenate([P, N], axis=0)  # columns: p_0..p_{b-1}, n_0..n_{b-1}
    logits = A @ C.T / tau

    if not cross_shard:
        if shard_size is None or shard_size < 1:
            raise ValueError("shard_size required when cross_shard is disabled")
        shard = np.arange(b) // shard_size
        allowed = shard[:, None] == np.concatenate([shard, shard])[None, :]
        logits = np.where(allowed, logits, MASK_NEG)

    target = np.arange(b)
    losses = _log_softmax_nll(logits, target)
    loss = float(losses.mean())

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    soft = exp / exp.sum(axis=1, keepdims=True)
    soft[np.arange(b), target] -= 1.0
    d_logits = soft / b
    dA = d_logits @ C / tau
    dC = d_logits.T @ A / tau
    return loss, dA, dC[:b], dC[b:]


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss(logits, labels, label_mask) -> float:
    """Scalar multi-label loss for one document.

    Only topics under the label mask contribute: per topic the loss is
    softplus(-logit) for a positive and softplus(logit) for a negative.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    mask = np.asarray(label_mask, dtype=bool)
    if not mask.any():
        raise ValueError("document has no labeled topics")
    z = logits[mask]
    y = labels[mask]
    return float(np.sum(_softplus(z) - y * z))


def bce_multilabel(logits, labels, label_mask):
    """Batched multi-label loss; mean over documents with at least one label.

    Documents whose mask is empty are skipped and counted. Returns
    (loss, d_logits, skipped).
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    mask = np.asarray(label_mask, dtype=bool)
    has_labels = mask.any(axis=1)
    skipped = int((~has_labels).sum())
    effective = int(has_labels.sum())
    if effective == 0:
        return 0.0, np.zeros_like(logits), skipped
    per_doc = np.sum((_softplus(logits) - labels * logits) * mask, axis=1)
    loss = float(per_doc[has_labels].mean())
    d_logits = (_sigmoid(logits) - labels) * mask / effective
    d_logits[~has_labels] = 0.0
    return loss, d_logits, skipped
