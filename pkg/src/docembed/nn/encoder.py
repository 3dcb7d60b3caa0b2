"""A tiny transformer text encoder with hand-written backpropagation.

One parameter set serves every tower of a triplet: the towers are just
separate forward passes. The encoder pools a document vector from the
first token of each segment (mean pooling when there are no attention
blocks), then two heads map it to a unit-norm semantic vector for the
contrastive objective and to per-topic classification logits.

Inputs may be packed: several documents share one sequence, attention is
blocked between segments, and position ids restart at each segment head.
A packed forward therefore yields one output row per segment, and a
segment's outputs match the unpacked forward to float roundoff regardless
of what shares its sequence.

Gradients are exact. A tower flagged ``stop_gradient`` contributes
normally to the loss value and to head gradients, but nothing flows back
into the transformer trunk (embeddings and blocks) through it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from docembed._validation import NumericError

LN_EPS = 1e-6
MASK_NEG = -1e30


@dataclass
class EncoderConfig:
    vocab_size: int
    embed_dim: int = 64
    num_blocks: int = 1
    num_heads: int = 4
    hidden_dim: int = 128
    semantic_dim: int = 32
    num_topics: int = 2
    max_len: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.num_blocks not in (0, 1, 2):
            raise ValueError("num_blocks must be 0, 1 or 2")
        if self.num_blocks > 0 and self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")


class EncoderParams:
    """Named parameter arrays plus the config that shaped them."""

    def __init__(self, config: EncoderConfig, arrays: dict[str, np.ndarray]):
        self.config = config
        self.arrays = arrays

    def __getitem__(self, key):
        return self.arrays[key]

    def keys(self):
        return self.arrays.keys()

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def trunk_keys(self):
        """Parameters upstream of the stop-gradient point."""
        return [k for k in self.arrays if not (k.startswith("sem.") or k.startswith("cls."))]

    def head_keys(self):
        return [k for k in self.arrays if k.startswith("sem.") or k.startswith("cls.")]

    def save(self, path) -> None:
        header = json.dumps({"format_version": 1, "config": asdict(self.config)})
        np.savez(path, __config__=np.frombuffer(header.encode(), dtype=np.uint8), **self.arrays)

    @classmethod
    def load(cls, path) -> "EncoderParams":
        data = np.load(str(path))
        header = json.loads(bytes(data["__config__"]).decode())
        if header.get("format_version") != 1:
            raise ValueError(f"unsupported checkpoint format: {header.get('format_version')}")
        config = EncoderConfig(**header["config"])
        arrays = {k: data[k] for k in data.files if k != "__config__"}
        return cls(config, arrays)


def init_params(config: EncoderConfig) -> EncoderParams:
    """Seeded Gaussian initialization, scale 1/sqrt(fan-in)."""
    rng = np.random.default_rng(config.seed)
    d = config.embed_dim

    def dense(fan_in, fan_out):
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))

    arrays: dict[str, np.ndarray] = {}
    arrays["tok_emb"] = rng.normal(0.0, 1.0 / np.sqrt(d), size=(config.vocab_size, d))
    for b in range(config.num_blocks):
        p = f"b{b}."
        for name in ("wq", "wk", "wv", "wo"):
            arrays[p + name] = dense(d, d)
            arrays[p + name.replace("w", "b", 1)] = np.zeros(d)
        arrays[p + "w1"] = dense(d, config.hidden_dim)
        arrays[p + "b1"] = np.zeros(config.hidden_dim)
        arrays[p + "w2"] = dense(config.hidden_dim, d)
        arrays[p + "b2"] = np.zeros(d)
        arrays[p + "ln1.g"] = np.ones(d)
        arrays[p + "ln1.b"] = np.zeros(d)
        arrays[p + "ln2.g"] = np.ones(d)
        arrays[p + "ln2.b"] = np.zeros(d)
    arrays["sem.w"] = dense(d, config.semantic_dim)
    arrays["sem.b"] = np.zeros(config.semantic_dim)
    arrays["cls.w"] = dense(d, config.num_topics)
    arrays["cls.b"] = np.zeros(config.num_topics)
    return EncoderParams(config, arrays)


def sinusoidal_encoding(positions: np.ndarray, dim: int) -> np.ndarray:
    """Classic fixed sin/cos position features; no learned parameters."""
    half = dim // 2
    freq = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    angles = positions[..., None] * freq
    out = np.zeros(positions.shape + (dim,))
    out[..., 0 : 2 * half : 2] = np.sin(angles)
    out[..., 1 : 2 * half + 1 : 2] = np.cos(angles)
    return out


@dataclass
class EncoderOutput:
    pooled: np.ndarray  # (segments, embed_dim)
    semantic: np.ndarray  # (segments, semantic_dim), unit rows
    logits: np.ndarray  # (segments, num_topics)


def _layer_norm_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x, num_heads):
    b, t, d = x.shape
    return x.reshape(b, t, num_heads, d // num_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def forward_batch(params: EncoderParams, ids, positions, seg_ids):
    """Encode a padded batch; returns (EncoderOutput, cache).

    ids/positions/seg_ids are (batch, time) int arrays. Padding cells carry
    seg_id -1; real cells number their segment 0, 1, ... within the
    sequence. Output rows are ordered by (sequence, segment).
    """
    config = params.config
    ids = np.asarray(ids, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    seg_ids = np.asarray(seg_ids, dtype=np.int64)
    if ids.ndim != 2:
        raise ValueError("ids must be (batch, time)")
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise ValueError("token id out of vocabulary range")

    valid = seg_ids >= 0
    mask = (seg_ids[:, :, None] == seg_ids[:, None, :]) & valid[:, :, None] & valid[:, None, :]

    x = params["tok_emb"][ids] + sinusoidal_encoding(positions, config.embed_dim)
    x = x * valid[..., None]  # zero out padding lanes

    blocks = []
    h = config.num_heads
    scale = 1.0 if config.num_blocks == 0 else 1.0 / np.sqrt(config.embed_dim // h)
    for b in range(config.num_blocks):
        p = f"b{b}."
        q = _split_heads(x @ params[p + "wq"] + params[p + "bq"], h)
        k = _split_heads(x @ params[p + "wk"] + params[p + "bk"], h)
        v = _split_heads(x @ params[p + "wv"] + params[p + "bv"], h)
        scores = np.einsum("bhid,bhjd->bhij", q, k) * scale
        scores = np.where(mask[:, None, :, :], scores, MASK_NEG)
        scores -= scores.max(axis=-1, keepdims=True)
        exp = np.exp(scores)
        att = exp / exp.sum(axis=-1, keepdims=True)
        ctx = np.einsum("bhij,bhjd->bhid", att, v)
        merged = _merge_heads(ctx)
        att_out = merged @ params[p + "wo"] + params[p + "bo"]
        r1 = x + att_out
        x1, ln1_cache = _layer_norm_forward(r1, params[p + "ln1.g"], params[p + "ln1.b"])
        pre = x1 @ params[p + "w1"] + params[p + "b1"]
        act = np.maximum(pre, 0.0)
        ffn = act @ params[p + "w2"] + params[p + "b2"]
        r2 = x1 + ffn
        x2, ln2_cache = _layer_norm_forward(r2, params[p + "ln2.g"], params[p + "ln2.b"])
        blocks.append(
            {
                "x_in": x,
                "q": q,
                "k": k,
                "v": v,
                "att": att,
                "merged": merged,
                "ln1": ln1_cache,
                "x1": x1,
                "act": act,
                "ln2": ln2_cache,
            }
        )
        x = x2

    # one output row per (sequence, segment)
    owners: list[tuple[int, int]] = []  # (sequence, segment)
    heads: list[int] = []  # head position for CLS pooling
    spans: list[np.ndarray] = []  # member positions for mean pooling
    batch_size, _ = ids.shape
    for s in range(batch_size):
        n_segs = int(seg_ids[s].max()) + 1 if valid[s].any() else 0
        for seg in range(n_segs):
            members = np.where(seg_ids[s] == seg)[0]
            owners.append((s, seg))
            heads.append(int(members[0]))
            spans.append(members)

    if config.num_blocks == 0:
        pooled = np.stack(
            [x[s][span].mean(axis=0) for (s, _), span in zip(owners, spans)]
        ) if owners else np.zeros((0, config.embed_dim))
    else:
        pooled = (
            np.stack([x[s, head] for (s, _), head in zip(owners, heads)])
            if owners
            else np.zeros((0, config.embed_dim))
        )

    sem_raw = pooled @ params["sem.w"] + params["sem.b"]
    norms = np.linalg.norm(sem_raw, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise NumericError("semantic projection collapsed to a zero vector")
    semantic = sem_raw / norms
    logits = pooled @ params["cls.w"] + params["cls.b"]

    cache = {
        "ids": ids,
        "valid": valid,
        "mask": mask,
        "blocks": blocks,
        "x_final": x,
        "owners": owners,
        "heads": heads,
        "spans": spans,
        "pooled": pooled,
        "semantic": semantic,
        "norms": norms,
        "scale": scale,
    }
    return EncoderOutput(pooled=pooled, semantic=semantic, logits=logits), cache


def backward_batch(
    params: EncoderParams,
    cache,
    d_pooled=None,
    d_semantic=None,
    d_logits=None,
    stop_gradient=False,
) -> dict[str, np.ndarray]:
    """Exact gradients of a scalar loss given gradients at the outputs.

    ``stop_gradient`` is a bool for the whole batch or a boolean array over
    output rows. Stopped rows still contribute head gradients; the trunk
    (token embeddings and blocks) receives exactly zero through them.
    """
    config = params.config
    grads = params.zeros_like()
    pooled = cache["pooled"]
    n_rows = pooled.shape[0]

    dp = np.zeros_like(pooled)
    if d_pooled is not None:
        dp += d_pooled
    if d_semantic is not None:
        sem = cache["semantic"]
        norms = cache["norms"]
        d_raw = (d_semantic - sem * np.sum(sem * d_semantic, axis=1, keepdims=True)) / norms
        grads["sem.w"] += pooled.T @ d_raw
        grads["sem.b"] += d_raw.sum(axis=0)
        dp += d_raw @ params["sem.w"].T
    if d_logits is not None:
        grads["cls.w"] += pooled.T @ d_logits
        grads["cls.b"] += d_logits.sum(axis=0)
        dp += d_logits @ params["cls.w"].T

    stop_rows = np.broadcast_to(np.asarray(stop_gradient, dtype=bool), (n_rows,))
    dp = np.where(stop_rows[:, None], 0.0, dp)
    if stop_rows.all() or n_rows == 0:
        return grads

    x_final = cache["x_final"]
    dx = np.zeros_like(x_final)
    if config.num_blocks == 0:
        for row, ((s, _), span) in enumerate(zip(cache["owners"], cache["spans"])):
            dx[s, span] += dp[row] / len(span)
    else:
        for row, ((s, _), head) in enumerate(zip(cache["owners"], cache["heads"])):
            dx[s, head] += dp[row]

    h = config.num_heads
    scale = cache["scale"]
    for b in reversed(range(config.num_blocks)):
        p = f"b{b}."
        blk = cache["blocks"][b]
        dx, dg2, db2 = _layer_norm_backward(dx, params[p + "ln2.g"], blk["ln2"])
        grads[p + "ln2.g"] += dg2
        grads[p + "ln2.b"] += db2
        # r2 = x1 + ffn(x1)
        d_r2 = dx
        d_ffn = d_r2
        act = blk["act"]
        flat_act = act.reshape(-1, act.shape[-1])
        flat_dffn = d_ffn.reshape(-1, d_ffn.shape[-1])
        grads[p + "w2"] += flat_act.T @ flat_dffn
        grads[p + "b2"] += flat_dffn.sum(axis=0)
        d_act = d_ffn @ params[p + "w2"].T
        d_pre = d_act * (act > 0)
        x1 = blk["x1"]
        flat_x1 = x1.reshape(-1, x1.shape[-1])
        flat_dpre = d_pre.reshape(-1, d_pre.shape[-1])
        grads[p + "w1"] += flat_x1.T @ flat_dpre
        grads[p + "b1"] += flat_dpre.sum(axis=0)
        d_x1 = d_r2 + d_pre @ params[p + "w1"].T

        d_x1, dg1, db1 = _layer_norm_backward(d_x1, params[p + "ln1.g"], blk["ln1"])
        grads[p + "ln1.g"] += dg1
        grads[p + "ln1.b"] += db1
        # r1 = x_in + attention(x_in)
        d_att_out = d_x1
        merged = blk["merged"]
        flat_merged = merged.reshape(-1, merged.shape[-1])
        flat_datt = d_att_out.reshape(-1, d_att_out.shape[-1])
        grads[p + "wo"] += flat_merged.T @ flat_datt
        grads[p + "bo"] += flat_datt.sum(axis=0)
        d_merged = d_att_out @ params[p + "wo"].T
        bsz, t, d = d_merged.shape
        d_ctx = d_merged.reshape(bsz, t, h, d // h).transpose(0, 2, 1, 3)
        att, v, q, k = blk["att"], blk["v"], blk["q"], blk["k"]
        d_att = np.einsum("bhid,bhjd->bhij", d_ctx, v)
        d_v = np.einsum("bhij,bhid->bhjd", att, d_ctx)
        d_scores = att * (d_att - np.sum(d_att * att, axis=-1, keepdims=True))
        d_q = np.einsum("bhij,bhjd->bhid", d_scores, k) * scale
        d_k = np.einsum("bhij,bhid->bhjd", d_scores, q) * scale

        x_in = blk["x_in"]
        flat_x_in = x_in.reshape(-1, d)
        d_x_in = d_x1.copy()
        for name, grad_heads in (("wq", d_q), ("wk", d_k), ("wv", d_v)):
            flat = _merge_heads(grad_heads).reshape(-1, d)
            grads[p + name] += flat_x_in.T @ flat
            grads[p + name.replace("w", "b", 1)] += flat.sum(axis=0)
            d_x_in += (flat @ params[p + name].T).reshape(bsz, t, d)
        dx = d_x_in

    dx = dx * cache["valid"][..., None]
    flat_ids = cache["ids"].reshape(-1)
    np.add.at(grads["tok_emb"], flat_ids, dx.reshape(-1, config.embed_dim))
    return grads


def forward(
    params: EncoderParams,
    token_ids,
    attention_mask=None,
    position_ids=None,
    stop_gradient: bool = False,
):
    """Single-sequence convenience wrapper; returns one EncoderOutput.

    Segments are inferred from position-id resets (a zero marks a segment
    head). ``attention_mask``, when given, must match the block-diagonal
    mask implied by the segments; it exists so callers holding an explicit
    mask can assert consistency.
    """
    token_ids = np.asarray(token_ids, dtype=np.int64)
    if position_ids is None:
        position_ids = np.arange(len(token_ids))
    position_ids = np.asarray(position_ids, dtype=np.int64)
    seg = np.cumsum(position_ids == 0) - 1
    if attention_mask is not None:
        expected = seg[:, None] == seg[None, :]
        if not np.array_equal(np.asarray(attention_mask, dtype=bool), expected):
            raise ValueError("attention_mask disagrees with position-id segments")
    out, _ = forward_batch(
        params, token_ids[None, :], position_ids[None, :], seg[None, :]
    )
    del stop_gradient  # value path is identical; the flag matters in backward
    return out
