import math
from fractions import Fraction

import numpy as np
import pytest

from mmvport import (
    DimensionMismatch,
    DiscreteLaw,
    RandomVariable,
    ValidationError,
    expected_quadratic_utility,
    expected_truncated_utility,
    mean,
    mean_variance_value,
    moments,
    monotone_mean_variance_value,
    second_moment,
    sharpe_ratio,
    variance,
)
from mmvport.probability import cash_level_bisection

from oracles import zoom_fmmv


def rv(values, probs=None):
    values = np.asarray(values, dtype=float)
    law = DiscreteLaw(probs) if probs is not None else DiscreteLaw.uniform(values.size)
    return RandomVariable(law, values)


class TestDiscreteLaw:
    def test_rejects_bad_vectors(self):
        with pytest.raises(ValidationError):
            DiscreteLaw(np.array([]))
        with pytest.raises(ValidationError):
            DiscreteLaw(np.array([0.5, 0.5, 0.0]))
        with pytest.raises(ValidationError):
            DiscreteLaw(np.array([0.7, -0.1, 0.4]))
        with pytest.raises(ValidationError):
            DiscreteLaw(np.array([0.5, 0.6]))
        with pytest.raises(ValidationError):
            DiscreteLaw(np.array([0.5, np.nan]))

    def test_uniform_and_weights(self):
        assert np.allclose(DiscreteLaw.uniform(4).probabilities, 0.25)
        law = DiscreteLaw.from_weights([2.0, 6.0])
        assert np.allclose(law.probabilities, [0.25, 0.75])
        with pytest.raises(ValidationError):
            DiscreteLaw.from_weights([1.0, 0.0])
        with pytest.raises(ValidationError):
            DiscreteLaw.uniform(0)

    def test_probabilities_read_only(self):
        law = DiscreteLaw.uniform(3)
        with pytest.raises(ValueError):
            law.probabilities[0] = 0.9


class TestRandomVariable:
    def test_shape_and_finiteness(self):
        law = DiscreteLaw.uniform(2)
        with pytest.raises(DimensionMismatch):
            RandomVariable(law, np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValidationError):
            RandomVariable(law, np.array([1.0, np.inf]))

    def test_arithmetic(self):
        X = rv([1.0, -2.0])
        Y = rv([0.5, 0.5])
        assert np.allclose((X + Y).values, [1.5, -1.5])
        assert np.allclose((X - 1.0).values, [0.0, -3.0])
        assert np.allclose((2.0 - X).values, [1.0, 4.0])
        assert np.allclose((3.0 * X).values, [3.0, -6.0])
        assert np.allclose((-X).values, [-1.0, 2.0])
        assert np.allclose(X.cap(0.25).values, [0.25, -2.0])
        assert X.min() == -2.0 and X.max() == 1.0

    def test_cross_law_arithmetic_rejected(self):
        X = rv([1.0, 2.0])
        Z = rv([1.0, 2.0], probs=np.array([0.3, 0.7]))
        with pytest.raises(DimensionMismatch):
            X + Z


class TestMoments:
    def test_exact_against_fractions(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            n = int(rng.integers(2, 7))
            num = rng.integers(-50, 51, size=n)
            wts = rng.integers(1, 9, size=n)
            values = num / 16.0
            law = DiscreteLaw.from_weights(wts.astype(float))
            X = RandomVariable(law, values)
            p = [Fraction(int(w), int(wts.sum())) for w in wts]
            x = [Fraction(int(v), 16) for v in num]
            m = sum(pi * xi for pi, xi in zip(p, x))
            m2 = sum(pi * xi * xi for pi, xi in zip(p, x))
            assert mean(X) == pytest.approx(float(m), abs=1e-14)
            assert second_moment(X) == pytest.approx(float(m2), abs=1e-13)
            assert variance(X) == pytest.approx(float(m2 - m * m), abs=1e-13)
            got = moments(X)
            assert got[0] == mean(X) and got[1] == second_moment(X)

    def test_variance_of_constant_is_zero(self):
        X = rv([3.7, 3.7, 3.7])
        assert variance(X) == 0.0


class TestSharpeRatio:
    def test_constant_conventions(self):
        assert sharpe_ratio(rv([2.0, 2.0])) == math.inf
        assert sharpe_ratio(rv([-1.0, -1.0])) == -math.inf
        assert sharpe_ratio(rv([0.0, 0.0])) == 0.0

    def test_matches_moments(self, trinomial_law):
        m, _, v = moments(trinomial_law)
        assert sharpe_ratio(trinomial_law) == pytest.approx(m / math.sqrt(v), abs=1e-15)
        assert sharpe_ratio(trinomial_law) == pytest.approx(
            math.sqrt(289.0 / 801.0), abs=1e-14
        )

    def test_scale_and_shift(self):
        X = rv([1.0, -0.5, 2.0], probs=np.array([0.2, 0.5, 0.3]))
        assert sharpe_ratio(4.0 * X) == pytest.approx(sharpe_ratio(X), abs=1e-13)


class TestUtilityFunctionals:
    def test_expected_values(self):
        X = rv([0.5, 2.0])
        # U(0.5) = 0.375, U(2) = 0; truncated caps the second atom at 1
        assert expected_quadratic_utility(X) == pytest.approx(0.1875, abs=1e-15)
        assert expected_truncated_utility(X) == pytest.approx(
            0.5 * 0.375 + 0.5 * 0.5, abs=1e-15
        )

    def test_mean_variance_value(self):
        X = rv([1.0, -1.0])
        assert mean_variance_value(X) == pytest.approx(-0.5, abs=1e-15)


class TestMonotoneMeanVarianceValue:
    def test_foc_holds_at_reported_cash(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            n = int(rng.integers(2, 9))
            X = rv(rng.uniform(-3.0, 4.0, size=n),
                   probs=DiscreteLaw.from_weights(rng.uniform(0.1, 1.0, n)).probabilities)
            got = monotone_mean_variance_value(X)
            shortfall = np.maximum(1.0 - X.values + got.cash_level, 0.0)
            residual = float(X.law.probabilities @ shortfall) - 1.0
            assert abs(residual) < 1e-12

    def test_against_zoom_grid(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            n = int(rng.integers(2, 8))
            X = rv(rng.uniform(-3.0, 4.0, size=n),
                   probs=DiscreteLaw.from_weights(rng.uniform(0.1, 1.0, n)).probabilities)
            got = monotone_mean_variance_value(X)
            ref_value, ref_cash = zoom_fmmv(X)
            assert got.value == pytest.approx(ref_value, abs=1e-9)
            assert got.cash_level == pytest.approx(ref_cash, abs=1e-5)

    def test_against_bisection_root(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            n = int(rng.integers(2, 8))
            X = rv(rng.uniform(-3.0, 4.0, size=n),
                   probs=DiscreteLaw.from_weights(rng.uniform(0.1, 1.0, n)).probabilities)
            got = monotone_mean_variance_value(X)
            assert got.cash_level == pytest.approx(cash_level_bisection(X), abs=1e-10)

    def test_cash_invariance_and_dominance(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            X = rv(rng.uniform(-3.0, 4.0, size=n))
            base = monotone_mean_variance_value(X)
            for c in (-2.0, 0.7, 5.0):
                shifted = monotone_mean_variance_value(X + c)
                assert shifted.value == pytest.approx(base.value + c, abs=1e-11)
                assert shifted.cash_level == pytest.approx(
                    base.cash_level + c, abs=1e-9
                )
            assert base.value >= mean_variance_value(X) - 1e-12

    def test_monotone_in_the_payoff(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            values = rng.uniform(-3.0, 4.0, size=n)
            bump = rng.uniform(0.0, 1.0, size=n)
            X = rv(values)
            Y = RandomVariable(X.law, values + bump)
            assert (
                monotone_mean_variance_value(Y).value
                >= monotone_mean_variance_value(X).value - 1e-12
            )

    def test_constant_law(self):
        got = monotone_mean_variance_value(rv([3.0, 3.0]))
        # the hull of a constant is the constant itself, attained at c = 3
        assert got.value == pytest.approx(3.0, abs=1e-12)
        assert got.cash_level == pytest.approx(3.0, abs=1e-12)
