"""Candidate pairs from per-space neighbor lists, and the date filter.

Documents that are close in at least one auxiliary space become candidate
pairs. Byline-date distance then decides their fate: same-story pairs are
published within a day of each other, while a pair more than a year apart
can safely serve as a hard negative. Everything in between is discarded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from docembed.aux_embed import Space
from docembed.corpus import Document
from docembed.neighbors import Neighbor

DEFAULT_MAX_POS_DAYS = 1
DEFAULT_MIN_NEG_DAYS = 365


@dataclass
class CandidatePair:
    anchor_id: str
    neighbor_id: str
    sims: dict[Space, float] = field(default_factory=dict)
    date_delta_days: int = 0


class PairLabel(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    DISCARD = "discard"


def generate_candidates(
    docs: list[Document],
    neighbor_lists: dict[Space, dict[str, list[Neighbor]]],
) -> list[CandidatePair]:
    """Union the per-space neighbor lists of every anchor into pairs.

    A pair retrieved in several spaces carries one similarity per space.
    Output is sorted by (anchor_id, neighbor_id).
    """
    dates = {doc.id: doc.byline_date for doc in docs}
    merged: dict[tuple[str, str], dict[Space, float]] = {}
    for space, per_anchor in neighbor_lists.items():
        for anchor_id, neighbors in per_anchor.items():
            for neighbor in neighbors:
                if neighbor.doc_id == anchor_id:
                    continue
                merged.setdefault((anchor_id, neighbor.doc_id), {})[space] = neighbor.score
    pairs = []
    for (anchor_id, neighbor_id), sims in sorted(merged.items()):
        pairs.append(
            CandidatePair(
                anchor_id=anchor_id,
                neighbor_id=neighbor_id,
                sims=sims,
                date_delta_days=abs(dates[anchor_id] - dates[neighbor_id]),
            )
        )
    return pairs


def date_filter(
    pair: CandidatePair,
    max_pos_days: int = DEFAULT_MAX_POS_DAYS,
    min_neg_days: int = DEFAULT_MIN_NEG_DAYS,
) -> PairLabel:
    if max_pos_days >= min_neg_days:
        raise ValueError("max_pos_days must be smaller than min_neg_days")
    if pair.date_delta_days <= max_pos_days:
        return PairLabel.POSITIVE
    if pair.date_delta_days >= min_neg_days:
        return PairLabel.NEGATIVE
    return PairLabel.DISCARD
