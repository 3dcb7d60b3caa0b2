"""Exponential smoothing of per-language counts and replicated sampling.

With counts n_1 >= n_2 >= ... and shares p_i = n_i / sum(n), the smoothed
expected count for language i is

    m_i = n_1 * (p_i / p_1) ** alpha

so alpha=1 keeps the distribution and alpha=0 lifts every language to the
largest one's count.
"""

from __future__ import annotations

from docembed._validation import check_random_state


def smooth_expected_counts(counts: dict[str, int], alpha: float) -> dict[str, float]:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if not counts:
        return {}
    if min(counts.values()) <= 0:
        raise ValueError("counts must be positive")
    n1 = max(counts.values())
    return {lang: n1 * (n / n1) ** alpha for lang, n in counts.items()}


def resample(
    doc_ids_by_language: dict[str, list[str]],
    expected: dict[str, float],
    seed: int,
) -> list[str]:
    """Replicate documents so each language totals ~m_i in expectation.

    Every document is repeated floor(m_i / n_i) times; the fractional part
    becomes one extra copy by a Bernoulli draw, so the per-document count
    has exactly the right mean. Languages iterate in sorted order, so the
    multiset is reproducible for a fixed seed.
    """
    rng = check_random_state(seed)
    out: list[str] = []
    for lang in sorted(doc_ids_by_language):
        ids = doc_ids_by_language[lang]
        if not ids:
            continue
        ratio = expected[lang] / len(ids)
        base = int(ratio)
        frac = ratio - base
        for doc_id in ids:
            reps = base + (1 if rng.random() < frac else 0)
            out.extend([doc_id] * reps)
    return out
