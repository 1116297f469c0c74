"""Decision thresholds for the networked sequential test.

Both thresholds are driven by the per-sample log-likelihood-ratio moments
(plain or clipped) and the consensus variance-bound scalar xi. The closed
form comes from bounding the error probability by a geometric series; it is
conservative. A tighter pair can be found by numerically solving the
underlying exponential series for the exact budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .network import XiBound

__all__ = [
    "ErrorBudget",
    "Thresholds",
    "ThresholdError",
    "closed_form",
    "tighter_numeric",
    "tightest",
]


class ThresholdError(ValueError):
    """Moments unusable for threshold design, or the numeric solve failed."""


@dataclass(frozen=True)
class ErrorBudget:
    """Required false-alarm (alpha) and misdetection (beta) probabilities."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 and 0.0 < self.beta < 1.0):
            raise ValueError("alpha and beta must lie in (0, 1)")


@dataclass(frozen=True)
class Thresholds:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < 0.0 < self.upper:
            raise ValueError("thresholds must satisfy lower < 0 < upper")


def _xi_value(xi) -> float:
    value = xi.value if isinstance(xi, XiBound) else float(xi)
    if value <= 0:
        raise ValueError("xi must be positive")
    return value


def _check_moments(moments) -> None:
    if not (moments.mean0 < 0.0 < moments.mean1):
        raise ThresholdError(
            "log-likelihood-ratio means must separate the hypotheses "
            f"(got {moments.mean0}, {moments.mean1})"
        )
    if moments.var0 <= 0 or moments.var1 <= 0:
        raise ThresholdError("log-likelihood-ratio variances must be positive")


def _log1m_exp(z: float) -> float:
    # log(1 - exp(-z)) for z > 0, stable for both small and large z
    return math.log(-math.expm1(-z))


def _closed_one_side(mean: float, var: float, xi: float, budget: float) -> float:
    # boundary value of the geometric-series bound, solved for the threshold
    z = mean * mean / (2.0 * var * xi)
    return (4.0 * var * xi / mean) * (math.log(budget / 2.0) + _log1m_exp(z))


def closed_form(moments, xi, budget: ErrorBudget) -> Thresholds:
    """Conservative thresholds in closed form (boundary of the bound).

    The upper threshold is driven by the H0 moments and alpha, the lower one
    by the H1 moments and beta. Works identically for plain and clipped
    moments; only the separation of the means is required.
    """
    _check_moments(moments)
    x = _xi_value(xi)
    upper = _closed_one_side(moments.mean0, moments.var0, x, budget.alpha)
    lower = _closed_one_side(moments.mean1, moments.var1, x, budget.beta)
    return Thresholds(lower, upper)


def crossing_bound_sum(
    threshold: float,
    mean: float,
    var: float,
    xi: float,
    tol_term: float = 0.0,
    t_max: int = 100_000,
) -> float:
    """Series bound on the probability of ever crossing ``threshold``.

    Sums 0.5 * exp(-(threshold - mean*t)^2 / (2*var*xi*t)) over t >= 1. The
    terms rise to a peak near t = |threshold/mean| and then decay with an
    eventually geometric tail; summation stops once past the peak and below
    ``tol_term``, or at ``t_max``.
    """
    denom = 2.0 * var * xi
    peak = abs(threshold / mean) if mean != 0 else float(t_max)
    total = 0.0
    for t in range(1, t_max + 1):
        d = threshold - mean * t
        term = 0.5 * math.exp(-(d * d) / (denom * t))
        total += term
        if t > peak and term < tol_term:
            break
    else:
        if tol_term > 0.0:
            raise ThresholdError("series truncation budget exceeded")
    return total


def _solve_one_side(mean, var, xi, budget, closed, tol, t_max) -> float:
    """Bisection for the threshold magnitude solving series(x) = budget."""
    mag_closed = abs(closed)

    def series(mag: float) -> float:
        # evaluate on the H0-style upper side; the lower side maps onto it
        # by sign symmetry of (threshold - mean*t)^2
        return crossing_bound_sum(mag, -abs(mean), var, xi, tol * budget, t_max)

    lo, hi = 0.0, 2.0 * mag_closed
    f_lo = series(1e-300)  # limit from the right; the sum is continuous at 0
    if f_lo < budget:
        raise ThresholdError(
            "series bound is below the budget even at a vanishing threshold; "
            "no positive solution to bracket"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if series(mid) > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, mag_closed):
            break
    return 0.5 * (lo + hi)


def tighter_numeric(
    moments,
    xi,
    budget: ErrorBudget,
    tol: float = 1e-9,
    t_max: int = 100_000,
) -> Thresholds:
    """Thresholds from numerically solving the series bound for the budget.

    Always at least as tight as the closed form (the closed form plugged into
    the series stays below the budget). Raises when the series cannot reach
    the budget for any positive threshold - with strong separation and loose
    budgets the bound certifies even a zero threshold, and no meaningful
    solution exists.
    """
    _check_moments(moments)
    if tol <= 0 or t_max < 1:
        raise ValueError("tol must be positive and t_max >= 1")
    x = _xi_value(xi)
    closed = closed_form(moments, xi, budget)
    upper = _solve_one_side(moments.mean0, moments.var0, x, budget.alpha, closed.upper, tol, t_max)
    lower = -_solve_one_side(moments.mean1, moments.var1, x, budget.beta, closed.lower, tol, t_max)
    return Thresholds(lower, upper)


def tightest(
    moments,
    xi,
    budget: ErrorBudget,
    tol: float = 1e-9,
    t_max: int = 100_000,
) -> Thresholds:
    """Numeric thresholds where solvable, closed form per side otherwise.

    Each side falls back independently, so one unbracketable side does not
    cost the other its tightness. Both branches honor the budgets.
    """
    _check_moments(moments)
    x = _xi_value(xi)
    closed = closed_form(moments, xi, budget)
    try:
        upper = _solve_one_side(
            moments.mean0, moments.var0, x, budget.alpha, closed.upper, tol, t_max
        )
    except ThresholdError:
        upper = closed.upper
    try:
        lower = -_solve_one_side(
            moments.mean1, moments.var1, x, budget.beta, closed.lower, tol, t_max
        )
    except ThresholdError:
        lower = closed.lower
    return Thresholds(lower, upper)
