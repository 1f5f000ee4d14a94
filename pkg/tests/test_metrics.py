import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loadsynth.errors import DataShapeError
from loadsynth.metrics import compare_reports, compute_metrics, render_comparison

import oracles


class TestComputeMetrics:
    def test_published_yearly_row_arithmetic(self):
        # two constant profiles whose totals have the published mean and
        # population spread: mean 59687.8133, std 5622.8101, d=34944
        d = 34944
        mu_total, sigma_total = 59687.8133, 5622.8101
        totals = [mu_total + sigma_total, mu_total - sigma_total]
        report = compute_metrics([np.full(d, t / d) for t in totals])
        assert report.mu == pytest.approx(1.7081, abs=1e-4)
        assert report.gamma_sigma_mu == pytest.approx(0.0942, abs=1e-4)
        assert report.mu_total == pytest.approx(mu_total, rel=1e-12)
        # the published dimension is recoverable from the published ratios
        assert mu_total / 1.7081 == pytest.approx(d, abs=0.5)

    def test_constant_profiles(self):
        report = compute_metrics([np.full(6, 2.5), np.full(6, 2.5)])
        assert report.sigma_total == 0.0
        assert report.gamma_sigma_mu == 0.0
        assert report.sigma_pro == 0.0
        assert report.p_max == report.p_min == 2.5
        assert report.c_max == report.c_min == 15.0

    def test_three_hand_profiles_match_brute_force(self):
        profiles = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
        report = compute_metrics(profiles)
        expected = oracles.brute_metrics(profiles)
        for name, value in expected.items():
            assert getattr(report, name) == pytest.approx(value, abs=1e-9), name

    def test_random_instances_match_brute_force(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 11))
            d = int(rng.integers(1, 11))
            profiles = rng.uniform(0, 5, size=(n, d))
            report = compute_metrics(profiles)
            expected = oracles.brute_metrics(profiles)
            for name, value in expected.items():
                assert getattr(report, name) == pytest.approx(value, abs=1e-9), name

    def test_interval_invariants(self, rng):
        profiles = rng.uniform(0, 3, size=(6, 8))
        report = compute_metrics(profiles)
        assert report.p_min <= report.mu <= report.p_max
        assert report.c_min <= report.mu_total <= report.c_max

    def test_l1_norm_option(self):
        profiles = np.array([[0.0, 4.0], [2.0, 0.0]])
        euclid = compute_metrics(profiles, norm="euclidean")
        l1 = compute_metrics(profiles, norm="l1")
        vars_ = profiles.var(axis=0)
        assert euclid.sigma_pro == pytest.approx(np.sqrt(np.sqrt((vars_**2).sum())))
        assert l1.sigma_pro == pytest.approx(np.sqrt(vars_.sum()))

    def test_shape_errors(self):
        with pytest.raises(DataShapeError):
            compute_metrics([])
        with pytest.raises(DataShapeError):
            compute_metrics([[1.0, 2.0], [1.0]])


class TestCompareReports:
    def test_identical_reports_zero_deltas(self, rng):
        profiles = rng.uniform(0, 2, size=(4, 6))
        report = compute_metrics(profiles)
        rows = compare_reports(report, report)
        assert all(r.delta == 0.0 for r in rows)
        assert all(r.rel_delta in (0.0, None) for r in rows)

    def test_published_pair_relative_delta(self):
        d = 34944
        raw = compute_metrics([np.full(d, 59687.8133 / d)])
        synth = compute_metrics([np.full(d, 59636.9444 / d)])
        row = {r.metric: r for r in compare_reports(raw, synth)}["mu_total"]
        assert row.rel_delta == pytest.approx(0.00085, abs=2e-5)

    def test_zero_raw_marks_relative_na(self):
        raw = compute_metrics([np.zeros(4)])
        synth = compute_metrics([np.ones(4)])
        rows = {r.metric: r for r in compare_reports(raw, synth)}
        assert rows["mu_total"].rel_delta is None
        assert "n/a" in render_comparison(list(rows.values()), "csv")

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DataShapeError):
            compare_reports(compute_metrics([np.ones(4)]), compute_metrics([np.ones(5)]))

    def test_render_formats(self, rng):
        report = compute_metrics(rng.uniform(0, 2, size=(3, 4)))
        rows = compare_reports(report, report)
        csv_text = render_comparison(rows, "csv")
        assert csv_text.splitlines()[0] == "metric,raw,synth,delta,rel_delta"
        assert len(csv_text.splitlines()) == 12  # header + 10 metrics + note
        table = render_comparison(rows, "table")
        assert "mu_total" in table and "rel_delta" in table


@settings(max_examples=40, deadline=None)
@given(
    data=st.lists(
        st.lists(st.floats(0.0, 50.0, allow_nan=False), min_size=4, max_size=4),
        min_size=2,
        max_size=6,
    ),
    alpha=st.floats(0.1, 10.0, allow_nan=False),
)
def test_property_permutation_and_scaling(data, alpha):
    X = np.asarray(data)
    base = compute_metrics(X)

    # profile order is irrelevant
    shuffled = compute_metrics(X[::-1])
    for name in ("mu", "mu_total", "sigma_total", "p_max", "p_min", "c_max", "c_min"):
        assert getattr(shuffled, name) == pytest.approx(getattr(base, name), rel=1e-12)

    # permuting time positions consistently keeps totals-based metrics
    permuted = compute_metrics(X[:, ::-1])
    for name in ("mu", "mu_total", "sigma_total", "gamma_sigma_mu", "c_max", "c_min"):
        assert getattr(permuted, name) == pytest.approx(getattr(base, name), rel=1e-12)

    # scaling every reading by alpha scales the kWh metrics and fixes gamma
    scaled = compute_metrics(alpha * X)
    for name in ("mu", "sigma_total", "p_max", "p_min", "c_max", "c_min", "mu_total", "sigma_pro"):
        assert getattr(scaled, name) == pytest.approx(
            alpha * getattr(base, name), rel=1e-9, abs=1e-12
        )
    if base.mu_total > 0:
        assert scaled.gamma_sigma_mu == pytest.approx(base.gamma_sigma_mu, rel=1e-9, abs=1e-12)
