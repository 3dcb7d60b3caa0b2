"""Greedy packing of short token sequences into near-capacity examples.

The packer keeps a bounded cache of partially packed sequences ordered by
length (longest first, ties by the id of the instance that created the
entry). Each incoming instance is appended to the first cached entry it
fits; the combination is emitted once it reaches the minimum packing
proportion, otherwise it goes back into the cache. When the cache
overflows its capacity, the longest entry is evicted and emitted as-is.

Packed examples carry per-segment position ids (restarting at zero) and a
block-diagonal attention mask so the segments cannot attend to each other.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np


@dataclass
class PackerConfig:
    capacity: int
    max_len: int
    min_proportion: float

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        if not 0.0 < self.min_proportion <= 1.0:
            raise ValueError("min_proportion must be in (0, 1]")


@dataclass
class PackedSequence:
    token_ids: list[int]
    segment_boundaries: list[int]  # start offset of each packed instance
    position_ids: list[int] | None = None
    attention_mask: np.ndarray | None = None
    # True when emitted by cache eviction or end-of-input flush rather than
    # by reaching min_proportion; such sequences may be shorter than rho*L.
    flushed: bool = False

    def __len__(self):
        return len(self.token_ids)

    def segment_slices(self):
        bounds = list(self.segment_boundaries) + [len(self.token_ids)]
        return [slice(bounds[i], bounds[i + 1]) for i in range(len(self.segment_boundaries))]


class _Cache:
    """Entries ordered by (length desc, creating-instance id asc)."""

    def __init__(self):
        self._keys: list[tuple[int, int]] = []  # (-length, instance_id)
        self._values: list[tuple[list[int], list[int]]] = []

    def __len__(self):
        return len(self._keys)

    def __iter__(self):
        return iter(enumerate(self._values))

    def insert(self, length: int, instance_id: int, tokens, boundaries):
        key = (-length, instance_id)
        pos = bisect.bisect_left(self._keys, key)
        self._keys.insert(pos, key)
        self._values.insert(pos, (tokens, boundaries))

    def pop(self, pos: int):
        self._keys.pop(pos)
        return self._values.pop(pos)

    def pop_first(self):
        return self.pop(0)


def pack_greedy(instances, config: PackerConfig) -> list[PackedSequence]:
    """Pack token-id sequences greedily; see the module docstring.

    After the input is exhausted, remaining cache entries are flushed in
    cache order so no instance is dropped; those are marked ``flushed``.
    """
    threshold = config.min_proportion * config.max_len
    cache = _Cache()
    out: list[PackedSequence] = []

    for i, instance in enumerate(instances, start=1):
        instance = list(instance)
        if len(instance) > config.max_len:
            raise ValueError(
                f"instance {i} has length {len(instance)} > max_len {config.max_len}"
            )
        processed = False
        for pos, (tokens, boundaries) in cache:
            if len(instance) + len(tokens) > config.max_len:
                continue
            cache.pop(pos)
            combined = tokens + instance
            bounds = boundaries + [len(tokens)]
            processed = True
            if len(combined) >= threshold:
                out.append(PackedSequence(combined, bounds))
            else:
                cache.insert(len(combined), i, combined, bounds)
            break
        if not processed:
            cache.insert(len(instance), i, instance, [0])
            if len(cache) > config.capacity:
                tokens, boundaries = cache.pop_first()
                out.append(PackedSequence(tokens, boundaries, flushed=True))

    while len(cache):
        tokens, boundaries = cache.pop_first()
        out.append(PackedSequence(tokens, boundaries, flushed=True))
    return out


def build_mask_and_positions(packed: PackedSequence) -> PackedSequence:
    """Fill position ids (reset per segment) and the block-diagonal mask."""
    length = len(packed.token_ids)
    positions = np.empty(length, dtype=np.int64)
    segment = np.empty(length, dtype=np.int64)
    for seg, sl in enumerate(packed.segment_slices()):
        positions[sl] = np.arange(sl.stop - sl.start)
        segment[sl] = seg
    mask = segment[:, None] == segment[None, :]
    return PackedSequence(
        token_ids=list(packed.token_ids),
        segment_boundaries=list(packed.segment_boundaries),
        position_ids=positions.tolist(),
        attention_mask=mask,
        flushed=packed.flushed,
    )


def save_packed(packed_sequences: list[PackedSequence], path) -> None:
    """Record file of (token_ids, segment_boundaries, flushed) triples."""
    import json

    with open(path, "w", encoding="utf-8") as handle:
        for seq in packed_sequences:
            handle.write(
                json.dumps(
                    {
                        "token_ids": seq.token_ids,
                        "segment_boundaries": seq.segment_boundaries,
                        "flushed": seq.flushed,
                    }
                )
                + "\n"
            )


def load_packed(path) -> list[PackedSequence]:
    import json

    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                obj = json.loads(line)
                out.append(
                    PackedSequence(
                        token_ids=obj["token_ids"],
                        segment_boundaries=obj["segment_boundaries"],
                        flushed=obj["flushed"],
                    )
                )
    return out
