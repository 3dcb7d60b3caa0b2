import numpy as np
import pytest

from docembed.text.sampling import resample, smooth_expected_counts


class TestSmoothing:
    def test_alpha_one_identity(self):
        counts = {"en": 1000, "de": 300, "fr": 50}
        m = smooth_expected_counts(counts, alpha=1.0)
        for lang, n in counts.items():
            assert m[lang] == pytest.approx(n)

    def test_alpha_zero_flattens_to_largest(self):
        counts = {"en": 1000, "de": 300, "fr": 50}
        m = smooth_expected_counts(counts, alpha=0.0)
        assert all(v == pytest.approx(1000) for v in m.values())

    def test_formula_value(self):
        # n = [1000, 10], alpha = 0.7: 1000 * (10/1000) ** 0.7 = 10 ** 1.6
        m = smooth_expected_counts({"a": 1000, "b": 10}, alpha=0.7)
        assert m["b"] == pytest.approx(10**1.6, abs=1e-6)
        assert m["b"] == pytest.approx(39.8107, abs=1e-3)

    def test_monotone_in_alpha(self):
        counts = {"big": 1000, "small": 10}
        previous = None
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            m = smooth_expected_counts(counts, alpha)["small"]
            if previous is not None:
                assert m < previous
            previous = m

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            smooth_expected_counts({"a": 10}, alpha=1.5)
        with pytest.raises(ValueError):
            smooth_expected_counts({"a": 0}, alpha=0.5)


class TestResample:
    def test_identity_when_expected_equals_count(self):
        ids = {"en": [f"d{i}" for i in range(10)]}
        out = resample(ids, {"en": 10.0}, seed=0)
        assert sorted(out) == sorted(ids["en"])

    def test_every_doc_two_or_three_times_at_ratio(self):
        ids = {"en": [f"d{i}" for i in range(8)]}
        out = resample(ids, {"en": 20.0}, seed=1)  # ratio 2.5
        counts = {i: out.count(i) for i in ids["en"]}
        assert set(counts.values()) <= {2, 3}

    def test_mean_count_matches_ratio(self):
        # Monte-Carlo oracle over seeds: the mean replication must approach
        # the 2.5 ratio
        ids = {"en": [f"d{i}" for i in range(8)]}
        totals = []
        for seed in range(2000):
            totals.append(len(resample(ids, {"en": 20.0}, seed=seed)))
        mean_count = np.mean(totals) / len(ids["en"])
        assert mean_count == pytest.approx(2.5, rel=0.05)

    def test_deterministic_for_seed(self):
        ids = {"en": [f"d{i}" for i in range(5)], "de": [f"g{i}" for i in range(3)]}
        m = {"en": 7.5, "de": 5.4}
        assert resample(ids, m, seed=42) == resample(ids, m, seed=42)
