import numpy as np
import pytest
from hypothesis import given, strategies as st

from breslow_lab import (
    ExpOverflowError,
    build_aggregates,
    d1_n,
    d2_n,
    phi_n,
    validate_dataset,
)

from conftest import random_dataset, survival_datasets
from oracles import central_diff_grad, central_diff_hessian


@pytest.fixture
def three_point():
    return validate_dataset([(1.0, True, [1.0]), (2.0, True, [0.0]), (3.0, True, [1.0])])


class TestBuildAggregates:
    def test_counts_at_beta_zero(self, three_point):
        agg = build_aggregates(three_point, [0.0])
        assert np.array_equal(agg.s0, [3.0, 2.0, 1.0])
        assert np.array_equal(agg.distinct_times, [1.0, 2.0, 3.0])

    def test_hand_value_at_log2(self, three_point):
        agg = build_aggregates(three_point, [np.log(2.0)])
        assert np.allclose(agg.s0, [5.0, 3.0, 2.0], rtol=1e-15)

    def test_no_covariate_reduction(self):
        data = validate_dataset([(1.0, True, []), (2.0, False, []), (3.0, True, [])])
        agg = build_aggregates(data, [])
        assert agg.s1.shape == (3, 0)
        assert agg.s2.shape == (3, 0, 0)
        assert np.array_equal(agg.s0, [3.0, 2.0, 1.0])

    def test_dimension_mismatch(self, three_point):
        with pytest.raises(ValueError, match="length"):
            build_aggregates(three_point, [0.0, 1.0])

    def test_overflow_is_hard_error(self):
        data = validate_dataset([(1.0, True, [800.0]), (2.0, True, [0.0])])
        with pytest.raises(ExpOverflowError, match="800"):
            build_aggregates(data, [1.0])

    def test_explicit_center_avoids_overflow(self):
        data = validate_dataset([(1.0, True, [800.0]), (2.0, True, [0.0])])
        agg = build_aggregates(data, [1.0], center=800.0)
        assert agg.log_scale == 800.0
        assert np.isfinite(agg.s0).all()

    def test_ties_grouped(self):
        data = validate_dataset(
            [(1.0, True, [0.5]), (1.0, False, [1.0]), (2.0, True, [0.0])]
        )
        agg = build_aggregates(data, [0.0])
        assert np.array_equal(agg.distinct_times, [1.0, 2.0])
        assert np.array_equal(agg.s0, [3.0, 1.0])

    def test_matches_plain_suffix_sums_general_p(self):
        rng = np.random.default_rng(5)
        data = random_dataset(rng, 40, 3)
        beta = rng.normal(size=3)
        agg = build_aggregates(data, beta)
        w = np.exp(data.covariates @ beta)
        for k, t in enumerate(agg.distinct_times):
            mask = data.times >= t
            assert np.isclose(agg.s0[k], w[mask].sum(), rtol=1e-13)
            assert np.allclose(agg.s1[k], (w[mask, None] * data.covariates[mask]).sum(0), rtol=1e-12, atol=1e-14)
            expected_s2 = np.einsum("n,ni,nj->ij", w[mask], data.covariates[mask], data.covariates[mask])
            assert np.allclose(agg.s2[k], expected_s2, rtol=1e-12, atol=1e-14)
            assert np.array_equal(agg.s2[k], agg.s2[k].T)


class TestPhiQueries:
    def test_counting(self, three_point):
        agg = build_aggregates(three_point, [0.0])
        assert phi_n(agg, 2.0) == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_weak_inequality_at_last_time(self, three_point):
        agg = build_aggregates(three_point, [np.log(2.0)])
        assert phi_n(agg, 3.0) == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_zero_beyond_last_time(self, three_point):
        agg = build_aggregates(three_point, [0.0])
        assert phi_n(agg, 3.0 + 1e-9) == 0.0

    def test_full_mass_below_min(self, three_point):
        agg = build_aggregates(three_point, [np.log(2.0)])
        assert phi_n(agg, 0.5) == pytest.approx(5.0 / 3.0, rel=1e-15)

    def test_d1_single_survivor(self, three_point):
        agg = build_aggregates(three_point, [0.0])
        assert np.allclose(d1_n(agg, 2.5), [1.0 / 3.0], rtol=1e-15)

    def test_d1_empty_for_p0(self):
        data = validate_dataset([(1.0, True, []), (2.0, False, [])])
        agg = build_aggregates(data, [])
        assert d1_n(agg, 1.0).shape == (0,)

    def test_d2_mean_of_squares(self, three_point):
        agg = build_aggregates(three_point, [0.0])
        assert np.allclose(d2_n(agg, 0.0), [[2.0 / 3.0]], rtol=1e-15)

    @given(data=survival_datasets(max_n=20, min_p=0, max_p=2), x=st.tuples(
        st.floats(0, 9, allow_nan=False), st.floats(0, 9, allow_nan=False)))
    def test_monotone_nonincreasing(self, data, x):
        beta = np.full(data.covariate_dim, 0.3)
        agg = build_aggregates(data, beta)
        lo, hi = sorted(x)
        assert phi_n(agg, lo) >= phi_n(agg, hi)


class TestDerivativeIdentities:
    def test_d1_matches_finite_difference(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            data = random_dataset(rng, int(rng.integers(4, 40)), int(rng.integers(1, 4)))
            beta = rng.normal(0, 0.5, size=data.covariate_dim)
            x = float(rng.uniform(0, data.times.max() * 1.1))
            agg = build_aggregates(data, beta)
            fd = central_diff_grad(
                lambda b: phi_n(build_aggregates(data, b), x), beta, h=1e-5
            )
            exact = d1_n(agg, x)
            assert np.allclose(exact, fd, rtol=1e-6, atol=1e-9)

    def test_d2_matches_finite_difference(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            data = random_dataset(rng, int(rng.integers(4, 30)), int(rng.integers(1, 3)))
            beta = rng.normal(0, 0.5, size=data.covariate_dim)
            x = float(rng.uniform(0, data.times.max()))
            agg = build_aggregates(data, beta)
            fd = central_diff_hessian(
                lambda b: phi_n(build_aggregates(data, b), x), beta, h=1e-4
            )
            assert np.allclose(d2_n(agg, x), fd, rtol=1e-5, atol=1e-7)


def test_kahan_accumulation_accuracy():
    # Suffix sums at n = 1e5 should carry far less than 1e-12 relative error;
    # compare against exact fsum suffix evaluation at a few checkpoints.
    import math

    rng = np.random.default_rng(11)
    n = 100_000
    times = rng.exponential(1.0, n) + 1e-3
    events = np.ones(n, dtype=bool)
    z = rng.normal(0, 1, (n, 1))
    from breslow_lab import SurvivalDataset

    data = SurvivalDataset(times, events, z)
    agg = build_aggregates(data, [0.4])
    w = np.exp(0.4 * z[:, 0])
    for k in [0, n // 3, 2 * n // 3, n - 1]:
        t = agg.distinct_times[k]
        exact = math.fsum(w[times >= t])
        assert abs(agg.s0[k] - exact) <= 1e-12 * exact
