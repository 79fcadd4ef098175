"""Finite-support probability laws and quadratic-utility functionals.

This module is the numerical bedrock of the package.  It models a finite
probability space as a vector of strictly positive atom probabilities
(:class:`DiscreteLaw`) and a random payoff as a vector of values on those
atoms (:class:`RandomVariable`), then evaluates the four wealth functionals
the rest of the package is built on:

``expected_quadratic_utility``
    F(X) = E[U(X)] with U(w) = w - w^2/2, the quadratic utility whose bliss
    level sits at wealth 1.

``expected_truncated_utility``
    F_t(X) = E[U(min(X, 1))].  Truncation at the bliss level makes the
    integrand nondecreasing in wealth, which is what the monotone theory
    needs.

``mean_variance_value``
    F_mv(X) = E[X] - Var(X)/2, the classical mean-variance score on the
    same risk-aversion scale.

``monotone_mean_variance_value``
    F_mmv(X) = sup_c { E[U(min(X - c, 1))] + c }, the cash-adjusted
    truncated functional.  The supremum is attained at the unique root of
    E[(1 - X + c)^+] = 1, which is piecewise linear and increasing in c, so
    the root is found exactly by walking the kinks; a bisection fallback
    exists purely as a cross-check.

Conventions
-----------
* Probabilities are strictly positive and sum to 1 within 1e-12; degenerate
  atoms must be removed by the caller before constructing a law.
* Sharpe ratios live on the extended real line with 1/0 = +inf,
  (-1)/0 = -inf and 0/0 = 0.
* Moment accumulation uses compensated summation (``math.fsum``) so that the
  functional identities hold to near machine precision even on laws with
  thousands of atoms and wildly mixed magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, ValidationError

__all__ = [
    "DiscreteLaw",
    "RandomVariable",
    "HullValue",
    "mean",
    "second_moment",
    "variance",
    "moments",
    "sharpe_ratio",
    "quadratic_utility",
    "truncated_utility",
    "expected_quadratic_utility",
    "expected_truncated_utility",
    "mean_variance_value",
    "monotone_mean_variance_value",
    "cash_level_bisection",
]

_PROB_SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DiscreteLaw:
    """Finite sample space carrying strictly positive atom probabilities.

    Parameters
    ----------
    probabilities : array-like of float
        Strictly positive weights summing to 1 within 1e-12.
    """

    probabilities: np.ndarray

    def __post_init__(self):
        p = _readonly(np.atleast_1d(self.probabilities))
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("law needs a nonempty 1-d probability vector")
        if not np.all(np.isfinite(p)):
            raise ValidationError("probabilities must be finite")
        if np.any(p <= 0.0):
            raise ValidationError("atom probabilities must be strictly positive")
        total = math.fsum(p.tolist())
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValidationError(
                f"probabilities sum to {total!r}, off by more than {_PROB_SUM_TOL}"
            )
        object.__setattr__(self, "probabilities", p)

    @property
    def size(self) -> int:
        return int(self.probabilities.size)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteLaw":
        if n <= 0:
            raise ValidationError("uniform law needs n >= 1")
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, weights) -> "DiscreteLaw":
        """Normalize strictly positive weights into a law."""
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        if w.size == 0 or np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and strictly positive")
        return cls(w / math.fsum(w.tolist()))

    def same_space(self, other: "DiscreteLaw") -> bool:
        if self is other:
            return True
        return (
            self.probabilities.shape == other.probabilities.shape
            and bool(np.array_equal(self.probabilities, other.probabilities))
        )


@dataclass(frozen=True)
class RandomVariable:
    """Payoff defined atom by atom on a :class:`DiscreteLaw`."""

    law: DiscreteLaw
    values: np.ndarray

    def __post_init__(self):
        v = _readonly(np.atleast_1d(self.values))
        if v.shape != self.law.probabilities.shape:
            raise DimensionMismatch(
                f"values shape {v.shape} does not match law of size {self.law.size}"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("payoff values must be finite")
        object.__setattr__(self, "values", v)

    def _check_same_space(self, other: "RandomVariable") -> None:
        if not self.law.same_space(other.law):
            raise DimensionMismatch("random variables live on different laws")

    def __add__(self, other):
        if isinstance(other, RandomVariable):
            self._check_same_space(other)
            return RandomVariable(self.law, self.values + other.values)
        return RandomVariable(self.law, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, RandomVariable):
            self._check_same_space(other)
            return RandomVariable(self.law, self.values - other.values)
        return RandomVariable(self.law, self.values - float(other))

    def __rsub__(self, other):
        return RandomVariable(self.law, float(other) - self.values)

    def __mul__(self, scalar):
        return RandomVariable(self.law, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return RandomVariable(self.law, -self.values)

    def cap(self, level: float) -> "RandomVariable":
        """Pointwise minimum with a constant level."""
        return RandomVariable(self.law, np.minimum(self.values, float(level)))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


def _fsum_dot(p: np.ndarray, x: np.ndarray) -> float:
    return math.fsum((p * x).tolist())


def mean(X: RandomVariable) -> float:
    return _fsum_dot(X.law.probabilities, X.values)


def second_moment(X: RandomVariable) -> float:
    return _fsum_dot(X.law.probabilities, X.values * X.values)


def moments(X: RandomVariable) -> tuple[float, float, float]:
    """Return (mean, second moment, variance) in one pass over the atoms.

    The variance is accumulated as E[(X - m)^2], which is nonnegative by
    construction and exact for constant payoffs.
    """
    p = X.law.probabilities
    x = X.values
    m = _fsum_dot(p, x)
    m2 = _fsum_dot(p, x * x)
    centred = x - m
    var = _fsum_dot(p, centred * centred)
    return m, m2, var


def variance(X: RandomVariable) -> float:
    return moments(X)[2]


def sharpe_ratio(X: RandomVariable) -> float:
    """Mean over standard deviation on the extended real line.

    Zero variance resolves by the sign of the mean: positive mean gives
    +inf, negative mean -inf, zero mean 0.
    """
    if np.all(X.values == X.values[0]):
        c = mean(X)
        if c > 0.0:
            return math.inf
        if c < 0.0:
            return -math.inf
        return 0.0
    m, _, var = moments(X)
    if var <= 0.0:
        return math.inf if m > 0.0 else (-math.inf if m < 0.0 else 0.0)
    return m / math.sqrt(var)


def quadratic_utility(w):
    """U(w) = w - w^2/2, elementwise."""
    w = np.asarray(w, dtype=float)
    out = w - 0.5 * w * w
    return float(out) if out.ndim == 0 else out


def truncated_utility(w):
    """U(min(w, 1)), elementwise; constant 1/2 above the bliss level."""
    w = np.minimum(np.asarray(w, dtype=float), 1.0)
    out = w - 0.5 * w * w
    return float(out) if out.ndim == 0 else out


def expected_quadratic_utility(X: RandomVariable) -> float:
    return _fsum_dot(X.law.probabilities, quadratic_utility(X.values))


def expected_truncated_utility(X: RandomVariable) -> float:
    return _fsum_dot(X.law.probabilities, truncated_utility(X.values))


def mean_variance_value(X: RandomVariable) -> float:
    m, _, var = moments(X)
    return m - 0.5 * var


class HullValue(NamedTuple):
    """Value of the cash-adjusted truncated functional and its maximizer."""

    value: float
    cash_level: float


def _exact_cash_root(values: np.ndarray, probs: np.ndarray) -> float:
    """Unique root of h(c) = E[(1 - X + c)^+] - 1.

    h is piecewise linear, nondecreasing, with kinks at c = x_i - 1, slope
    equal to the probability mass of atoms already activated, and h -> -1
    to the left of all kinks.  Walk the kink segments left to right and
    solve the linear piece that brackets zero; recompute the active sums
    with compensated summation before dividing so the root carries no
    cumulative-sum error.
    """
    order = np.argsort(values, kind="stable")
    x = values[order]
    p = probs[order]
    # kink positions in increasing c are x_i - 1 for x sorted ascending
    mass = np.cumsum(p)
    partial = np.cumsum(p * x)
    n = x.size
    for k in range(n):
        m_k = mass[k]
        if m_k <= 0.0:
            continue
        # candidate root on [x_k - 1, x_{k+1} - 1] where atoms 0..k are active
        c_star = (1.0 + partial[k]) / m_k - 1.0
        right = x[k + 1] - 1.0 if k + 1 < n else math.inf
        if x[k] - 1.0 <= c_star <= right:
            active = slice(0, k + 1)
            m_exact = math.fsum(p[active].tolist())
            s_exact = math.fsum((p[active] * x[active]).tolist())
            return (1.0 + s_exact) / m_exact - 1.0
    # full mass segment always brackets the root; reaching here means the
    # candidates straddled kinks by rounding, so fall back to the last piece
    m_exact = math.fsum(p.tolist())
    s_exact = math.fsum((p * x).tolist())
    return (1.0 + s_exact) / m_exact - 1.0


def cash_level_bisection(
    X: RandomVariable,
    tol_scale: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Root of E[(1 - X + c)^+] = 1 by bracketed bisection.

    Slow reference for the exact kink walk; the initial bracket
    [min(X) - 2, max(X) + 2] is widened geometrically if needed and the
    search stops once the bracket width falls below tol_scale * (1 + |c|).
    """
    p = X.law.probabilities
    x = X.values

    def h(c: float) -> float:
        return math.fsum((p * np.maximum(1.0 - x + c, 0.0)).tolist()) - 1.0

    lo = float(x.min()) - 2.0
    hi = float(x.max()) + 2.0
    span = hi - lo
    for _ in range(200):
        if h(lo) < 0.0:
            break
        lo -= span
        span *= 2.0
    span = hi - lo
    for _ in range(200):
        if h(hi) > 0.0:
            break
        hi += span
        span *= 2.0
    for _ in range(max_iter):
        c = 0.5 * (lo + hi)
        if hi - lo <= tol_scale * (1.0 + abs(c)):
            return c
        if h(c) >= 0.0:
            hi = c
        else:
            lo = c
    return 0.5 * (lo + hi)


def monotone_mean_variance_value(X: RandomVariable) -> HullValue:
    """Evaluate sup_c { E[U(min(X - c, 1))] + c } and its maximizer.

    The first-order condition is E[(1 - X + c)^+] = 1; the objective is
    concave in c so the root is the global maximizer.
    """
    c_hat = _exact_cash_root(X.values, X.law.probabilities)
    value = expected_truncated_utility(X - c_hat) + c_hat
    return HullValue(value=value, cash_level=c_hat)
