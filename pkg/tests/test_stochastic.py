import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import iv

from fairrebalance.stochastic import (
    RandomSource,
    SkellamParams,
    bessel_i,
    bessel_i_scaled,
    censored_transition,
    censored_transition_row,
    sample_poisson,
    sample_poisson_many,
    skellam_pmf,
)

import oracles


def series_i(n, x, terms=30):
    return sum((x / 2) ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n)) for k in range(terms))


# frozen before the build from the 30-term series
I0_AT_2 = 2.2795853023360673
SKELLAM_0_11 = 0.30850832255367103


class TestBessel:
    def test_origin(self):
        assert bessel_i(0, 0.0) == 1.0
        assert bessel_i(1, 0.0) == 0.0
        assert bessel_i(-3, 0.0) == 0.0

    def test_series_value(self):
        assert series_i(0, 2.0) == pytest.approx(I0_AT_2, rel=1e-15)
        assert bessel_i(0, 2.0) == pytest.approx(I0_AT_2, rel=1e-13)

    @pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 40])
    @pytest.mark.parametrize("x", [0.1, 1.0, 7.3, 29.9, 30.1, 55.0, 120.0, 200.0])
    def test_against_scipy(self, n, x):
        assert bessel_i(n, x) == pytest.approx(iv(n, x), rel=1e-10)

    @given(st.integers(0, 300), st.floats(0.0, 200.0))
    @settings(max_examples=200, deadline=None)
    def test_negative_order_is_exact_mirror(self, n, x):
        assert bessel_i(-n, x) == bessel_i(n, x)
        assert bessel_i(n, x) >= 0.0

    def test_scaled_large_argument(self):
        # I_0(x) e^{-x} ~ 1/sqrt(2 pi x)
        x = 5e4
        assert bessel_i_scaled(0, x) == pytest.approx(1 / math.sqrt(2 * math.pi * x), rel=1e-5)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bessel_i(0, -1.0)
        with pytest.raises(ValueError):
            bessel_i(1001, 1.0)

    def test_overflow_is_explicit(self):
        with pytest.raises(OverflowError):
            bessel_i(0, 800.0)


class TestSkellam:
    def test_params_validated(self):
        with pytest.raises(ValueError):
            SkellamParams(-1.0, 1.0)
        with pytest.raises(ValueError):
            SkellamParams(1.0, 1.0, t=0.0)

    def test_unit_rates_at_zero(self):
        assert oracles.skellam_by_convolution(0, 1, 1) == pytest.approx(SKELLAM_0_11, rel=1e-14)
        assert skellam_pmf(0, SkellamParams(1, 1)) == pytest.approx(SKELLAM_0_11, rel=1e-13)
        assert skellam_pmf(0, SkellamParams(1, 1)) == pytest.approx(math.exp(-2) * I0_AT_2, rel=1e-13)

    def test_swap_symmetry(self):
        assert skellam_pmf(3, SkellamParams(2, 5)) == skellam_pmf(-3, SkellamParams(5, 2))

    @given(st.integers(-60, 60), st.floats(0.0, 20.0), st.floats(0.0, 20.0), st.floats(0.1, 3.0))
    @settings(max_examples=300, deadline=None)
    def test_swap_symmetry_property(self, n, la, ld, t):
        assert skellam_pmf(n, SkellamParams(la, ld, t)) == skellam_pmf(-n, SkellamParams(ld, la, t))

    def test_normalisation(self):
        total = sum(skellam_pmf(n, SkellamParams(3.3, 1.5)) for n in range(-100, 101))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_poisson_limits(self):
        p = SkellamParams(4.0, 0.0)
        assert skellam_pmf(3, p) == pytest.approx(math.exp(-4) * 4**3 / 6, rel=1e-14)
        assert skellam_pmf(-1, p) == 0.0
        q = SkellamParams(0.0, 2.5, t=2.0)
        assert skellam_pmf(-2, q) == pytest.approx(math.exp(-5) * 25 / 2, rel=1e-14)
        assert skellam_pmf(1, q) == 0.0
        assert skellam_pmf(0, SkellamParams(0.0, 0.0)) == 1.0

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_time_scaling_matches_oracle(self, t):
        for n in range(-20, 21):
            assert skellam_pmf(n, SkellamParams(3.0, 2.0, t)) == pytest.approx(
                oracles.skellam_by_convolution(n, 3.0, 2.0, t), abs=1e-12)


class TestCensoredTransition:
    def test_pinned_at_zero(self):
        assert censored_transition(0, 0, SkellamParams(0.0, 5.0)) == pytest.approx(1.0, abs=1e-15)

    def test_uncensored_branch(self):
        p = SkellamParams(2.0, 1.0)
        assert censored_transition(5, 7, p) == skellam_pmf(2, p)

    def test_zero_branch_against_oracle(self):
        expected = oracles.censored_zero_mass(2, 1.0, 3.0)
        assert censored_transition(2, 0, SkellamParams(1.0, 3.0)) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("m", [0, 1, 3, 10, 40])
    def test_rows_sum_to_one(self, m):
        p = SkellamParams(3.3, 1.5)
        top = m + int(10 * (p.lambda_a + p.lambda_d)) + 1
        assert sum(censored_transition(m, n, p) for n in range(top + 1)) == pytest.approx(1.0, abs=1e-9)

    def test_row_with_cap_folds_upper_tail(self):
        p = SkellamParams(6.0, 1.0)
        row = censored_transition_row(8, p, cap=10)
        assert row.shape == (11,)
        assert row.sum() == pytest.approx(1.0, abs=1e-12)
        P, _ = oracles.window_model(6.0, 1.0, 10)
        np.testing.assert_allclose(row, P[8], atol=1e-12)

    def test_rejects_negative_occupancy(self):
        with pytest.raises(ValueError):
            censored_transition(-1, 0, SkellamParams(1, 1))


class TestRandomSource:
    def test_replay(self):
        a, b = RandomSource(42), RandomSource(42)
        assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
        assert sample_poisson(4.0, RandomSource(7)) == sample_poisson(4.0, RandomSource(7))

    def test_seed_range(self):
        RandomSource(2**64 - 1)
        with pytest.raises(ValueError):
            RandomSource(-1)
        with pytest.raises(ValueError):
            RandomSource(2**64)

    def test_zero_rate(self):
        rng = RandomSource(3)
        assert all(sample_poisson(0.0, rng) == 0 for _ in range(100))

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            sample_poisson(-0.1, RandomSource(0))
        with pytest.raises(ValueError):
            sample_poisson(2e6, RandomSource(0))

    def test_mean_at_table_rate(self):
        draws = sample_poisson_many(13.8, 10**6, RandomSource(11))
        assert abs(draws.mean() - 13.8) < 0.14

    @pytest.mark.parametrize("rate", [0.1, 0.3, 1.5, 4.0, 9.99, 10.0, 25.0, 50.0])
    def test_mean_within_one_percent(self, rate):
        draws = sample_poisson_many(rate, 10**6, RandomSource(int(rate * 1000)))
        assert abs(draws.mean() - rate) < 0.01 * rate

    @pytest.mark.parametrize("rate", [2.0, 13.8, 40.0])
    def test_distribution_shape(self, rate):
        from scipy.stats import chisquare, poisson

        draws = sample_poisson_many(rate, 200_000, RandomSource(5))
        lo, hi = int(poisson.ppf(1e-4, rate)), int(poisson.ppf(1 - 1e-4, rate))
        ks = np.arange(lo, hi + 1)
        obs = np.array([(draws == k).sum() for k in ks] + [((draws < lo) | (draws > hi)).sum()])
        exp = np.append(poisson.pmf(ks, rate), 1 - poisson.pmf(ks, rate).sum()) * draws.size
        assert chisquare(obs, exp).pvalue > 1e-4
