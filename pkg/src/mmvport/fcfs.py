"""Free cash-flow-stream analysis of a scenario-tree market.

``analyze`` runs the full pipeline on a viable market: both
variance-optimal densities, the quadratic and truncated primal optima and
the monotone mean-variance allocation, then assembles the market-level
report.  The headline quantities all follow from the two optimal second
moments a_s (signed) and a_n (nonnegative):

    u    = 1/2 - 1/(2 a_s)      best quadratic utility from wealth 0
    u_m  = 1/2 - 1/(2 a_n)      best truncated utility from wealth 0
    u_mv = (a_s - 1)/2          best mean-variance score from wealth 0
    u_mmv= (a_n - 1)/2          best monotone mean-variance score
    sr_max   = sqrt(a_s - 1)    maximal Sharpe ratio
    sr_m_max = sqrt(a_n - 1)    maximal monotone Sharpe ratio
    c_hat_m  = a_n - 1          precommitted cash level of the optimum

Four logically equivalent completeness tests are evaluated on separate
computational routes and must agree:

    a. u_mmv == u_mv            (dual second moments)
    b. u_m == u                 (primal objective values)
    c. max quadratic-optimal payoff <= 1     (payoff route)
    d. signed variance-optimal density >= 0  (density route)

A free cash-flow stream exists exactly when the tests are false: the
market then rewards throwing wealth away, and the certificate payoff
(1 - W_m)^+ built from the truncated-optimal wealth W_m is a nonzero
claim the strategy dominates.  ``verify_fcfs_certificate`` re-derives the
certificate from the reported strategy alone: it withdraws the upper
excess lam*(W_m - 1)^+ as free cash and checks the left-over wealth
lam*min(W_m, 1) still scores u_mmv on the plain mean-variance scale,
strictly above the no-withdrawal frontier value u_mv.  Verification
presupposes the report claims existence; calling it on a report with
``fcfs_exists`` false is itself a certificate error.

Disagreement handling: the four routes see the completeness boundary at
different resolutions.  A density dip of size eps forces a value gap of
only about p*eps^2/2 (exactly, u_mmv - u_mv >= p_j (z_n_j - z_s_j)^2 / 2
on the dipping leaf j), so markets close to the boundary can split the
vote: the vector routes (payoff cap, density sign) detect eps linearly
while the value routes are quadratically blind to it.  Splits whose
discriminants are all small enough to be such boundary effects mark the
report ``marginal`` and resolve by the density route, the primitive
linear-resolution test.  A split featuring a large discriminant cannot
come from the boundary layer and raises InconsistentEquivalence, which is
an internal assertion, never a valid analysis outcome.  Reports whose
routes agree but with some discriminant within a factor 10 of its
tolerance are likewise annotated ``marginal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dual import DualSolution, variance_optimal_nonneg, variance_optimal_signed
from .errors import CertificateInvalid, InconsistentEquivalence, ViabilityError
from .market import ScenarioTree, check_viability, terminal_wealth
from .primal import (
    MmvAllocation,
    PrimalSolution,
    mmv_allocation,
    optimal_quadratic,
    optimal_truncated,
)
from .probability import RandomVariable, mean_variance_value

__all__ = ["FcfsReport", "analyze", "verify_fcfs_certificate", "report_to_dict"]

VALUE_TOL = 1e-8
VECTOR_TOL = 1e-9
_PAYOFF_FLOOR = 1e-12
_MARGINAL_BAND = 10.0
# Largest discriminants a boundary-layer vote split may exhibit: value
# gaps up to 1e-5 pair with density dips and payoff overshoots up to
# sqrt(2 * 1e-5 / p_min); anything larger signals a solver bug.
_SPLIT_VALUE_CEILING = 1e-5
_SPLIT_VECTOR_CEILING = 1e-2


@dataclass(frozen=True, eq=False)
class FcfsReport:
    """Full analysis of one market; see the module docstring for fields."""

    tree: ScenarioTree
    u: float
    u_m: float
    u_mv: float
    u_mmv: float
    sr_max: float
    sr_m_max: float
    c_hat_m: float
    equiv: dict
    marginal: bool
    fcfs_exists: bool
    fcfs_payoff: np.ndarray | None
    signed_density: np.ndarray
    nonneg_density: np.ndarray
    signed_solution: DualSolution
    nonneg_solution: DualSolution
    quad_solution: PrimalSolution
    hull_solution: PrimalSolution
    allocation: MmvAllocation
    discriminants: dict

    @property
    def gap(self) -> float:
        """Monotone-Sharpe improvement sr_m_max - sr_max (zero iff complete)."""
        return self.sr_m_max - self.sr_max


def analyze(tree: ScenarioTree) -> FcfsReport:
    """Run the full pipeline; raises ViabilityError on non-viable markets."""
    certificate = check_viability(tree)
    if not certificate:
        raise ViabilityError(
            "market admits no strictly positive martingale density",
            best_bound=certificate.bound,
        )

    signed = variance_optimal_signed(tree)
    nonneg = variance_optimal_nonneg(tree)
    a_s = signed.second_moment
    a_n = nonneg.second_moment

    quad = optimal_quadratic(tree, 0.0)
    hull = optimal_truncated(tree, 0.0)
    allocation = mmv_allocation(tree, 0.0)

    u = 0.5 - 0.5 / a_s
    u_m = 0.5 - 0.5 / a_n
    u_mv = 0.5 * (a_s - 1.0)
    u_mmv = 0.5 * (a_n - 1.0)

    discriminants = {
        "a": max(u_mmv - u_mv, 0.0),
        "b": max(hull.value - quad.value, 0.0),
        "c": max(float(quad.payoff.values.max()) - 1.0, 0.0),
        "d": max(-float(signed.density.values.min()), 0.0),
    }
    tolerances = {"a": VALUE_TOL, "b": VALUE_TOL, "c": VECTOR_TOL, "d": VECTOR_TOL}
    equiv = {k: discriminants[k] <= tolerances[k] for k in "abcd"}
    marginal = any(
        tolerances[k] / _MARGINAL_BAND <= discriminants[k]
        <= tolerances[k] * _MARGINAL_BAND
        for k in "abcd"
    )

    votes = sum(equiv.values())
    if votes in (0, 4):
        consensus = bool(votes)
    elif (
        discriminants["a"] <= _SPLIT_VALUE_CEILING
        and discriminants["b"] <= _SPLIT_VALUE_CEILING
        and discriminants["c"] <= _SPLIT_VECTOR_CEILING
        and discriminants["d"] <= _SPLIT_VECTOR_CEILING
    ):
        # Boundary layer: a small density dip shrinks quadratically in the
        # value routes, so they can report "equal" while the vector routes
        # still see it.  The density sign is the sharpest test here.
        marginal = True
        consensus = equiv["d"]
    else:
        raise InconsistentEquivalence(
            f"equivalence routes disagree beyond tolerance: {discriminants!r}"
        )

    fcfs_payoff = None
    if hull.value > _PAYOFF_FLOOR:
        fcfs_payoff = np.maximum(1.0 - hull.payoff.values, 0.0)
        fcfs_payoff.setflags(write=False)

    return FcfsReport(
        tree=tree,
        u=u,
        u_m=u_m,
        u_mv=u_mv,
        u_mmv=u_mmv,
        sr_max=math.sqrt(max(a_s - 1.0, 0.0)),
        sr_m_max=math.sqrt(max(a_n - 1.0, 0.0)),
        c_hat_m=a_n - 1.0,
        equiv=equiv,
        marginal=marginal,
        fcfs_exists=not consensus,
        fcfs_payoff=fcfs_payoff,
        signed_density=signed.density.values,
        nonneg_density=nonneg.density.values,
        signed_solution=signed,
        nonneg_solution=nonneg,
        quad_solution=quad,
        hull_solution=hull,
        allocation=allocation,
        discriminants=discriminants,
    )


def verify_fcfs_certificate(report: FcfsReport) -> bool:
    """Re-derive the free cash-flow certificate; True or CertificateInvalid.

    Requires a report that claims existence.  From the reported strategies
    alone: rebuild the truncated-optimal wealth W_m, check the certificate
    payoff is a nonzero nonnegative claim matching (1 - W_m)^+, withdraw
    the upper excess lam (W_m - 1)^+, and check the left-over wealth
    lam min(W_m, 1) scores u_mmv under the plain mean-variance functional,
    strictly above the no-withdrawal value u_mv.  Every violated clause
    raises CertificateInvalid naming the clause; the function never
    returns False.
    """
    if not report.fcfs_exists:
        raise CertificateInvalid(
            "nothing to verify: the report does not claim a free "
            "cash-flow stream"
        )
    tree = report.tree
    lam = report.allocation.leverage
    W_m = terminal_wealth(tree, report.allocation.hull_strategy, 0.0).values

    claimed = report.fcfs_payoff
    if claimed is None or float(np.max(claimed)) <= VECTOR_TOL:
        raise CertificateInvalid(
            "existence claimed but the certificate payoff is never positive"
        )
    if float(np.min(claimed)) < -VECTOR_TOL:
        raise CertificateInvalid(
            "certificate payoff has a negative atom"
        )
    rebuilt = np.maximum(1.0 - W_m, 0.0)
    if claimed.shape != rebuilt.shape or float(
        np.max(np.abs(claimed - rebuilt))
    ) > VECTOR_TOL:
        raise CertificateInvalid(
            "certificate payoff does not match (1 - W_m)^+ from the "
            "reported strategy"
        )

    withdrawn = lam * np.maximum(W_m - 1.0, 0.0)
    if float(np.max(withdrawn)) <= VECTOR_TOL:
        raise CertificateInvalid(
            "existence claimed but no cash is ever withdrawn"
        )
    leftover = RandomVariable(tree.law, lam * W_m - withdrawn)
    score = mean_variance_value(leftover)
    if abs(score - report.u_mmv) > VALUE_TOL:
        raise CertificateInvalid(
            f"left-over wealth scores {score!r} on the mean-variance scale, "
            f"expected {report.u_mmv!r}"
        )
    if score <= report.u_mv + VECTOR_TOL:
        raise CertificateInvalid(
            "existence claimed but the mean-variance improvement is not "
            "strict"
        )
    return True


def _sig(value: float) -> float:
    if math.isinf(value) or math.isnan(value):
        return value
    return float(f"{value:.12g}")


def report_to_dict(report: FcfsReport) -> dict:
    """Serialize a report to the documented plain-dict shape (12 digits)."""
    tree = report.tree
    strategy = {
        nid: [_sig(v) for v in report.allocation.strategy.holdings[nid]]
        for nid in tree.nonterminal_ids
    }
    return {
        "u": _sig(report.u),
        "u_m": _sig(report.u_m),
        "u_mv": _sig(report.u_mv),
        "u_mmv": _sig(report.u_mmv),
        "sr_max": _sig(report.sr_max),
        "sr_m_max": _sig(report.sr_m_max),
        "c_hat_m": _sig(report.c_hat_m),
        "equiv": {k: bool(report.equiv[k]) for k in "abcd"},
        "fcfs_exists": bool(report.fcfs_exists),
        "fcfs_payoff": (
            None
            if report.fcfs_payoff is None
            else [_sig(v) for v in report.fcfs_payoff]
        ),
        "signed_density": [_sig(v) for v in report.signed_density],
        "nonneg_density": [_sig(v) for v in report.nonneg_density],
        "strategy": strategy,
        "marginal": bool(report.marginal),
    }
