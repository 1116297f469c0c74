"""Least-favorable densities for epsilon-contaminated Gaussian tests.

Under epsilon-contamination the worst-case pair of densities is the one of
the clipped likelihood-ratio test: each least-favorable density equals the
scaled nominal except in one tail, where it is lifted to a fixed multiple of
the other density. Equivalently, the log-likelihood ratio of the pair is the
nominal ratio clamped to a band [C0, C1]:

    q0(y) = max((1 - eps) * p0(y), (1 - eps) * p1(y) * exp(-C1))
    q1(y) = max((1 - eps) * p1(y), (1 - eps) * p0(y) * exp(C0))

so that log(q1/q0) = clamp(log(p1/p0), C0, C1). Each clipping bound is fixed
by requiring its density to integrate to one, which this module solves by
bisection on the quadrature residual. The band shrinks as eps grows; when
the two bounds meet, no valid pair exists and the solver reports it.

The statistic built from clamped ratios concentrates excess probability at
the band edges. Approximating its law by two point masses plus a uniform
interior level yields closed-form moments for threshold design. Following
the convention used throughout for that approximation, the Gaussian tail
function is evaluated with the variance (not the standard deviation) in the
denominator; ``use_std=True`` switches to the conventional scaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hypothesis import GaussianBinaryTest, LlrMoments, llr, llr_moments, log_densities

__all__ = [
    "ClippedLrtParams",
    "ExcessMass",
    "ClippedLlrMoments",
    "LfdBandError",
    "LfdConvergenceError",
    "solve_lfd_eps",
    "clipped_llr",
    "lfd_log_densities",
    "lfd_densities",
    "excess_masses",
    "llr_cdf",
    "clipped_llr_moments",
    "support_interval",
    "adaptive_simpson",
]


class LfdBandError(RuntimeError):
    """Contamination too heavy: the clipping bounds cross."""


class LfdConvergenceError(RuntimeError):
    """Normalization residual not met within the iteration budget."""


@dataclass(frozen=True)
class ClippedLrtParams:
    """Clipping band of the least-favorable pair for a given test.

    ``lower``/``upper`` are the log-likelihood-ratio clipping bounds C0 < C1;
    the equivalent density multipliers are exposed as c0 = exp(-C0) and
    c1 = exp(C1). ``eps == 0`` yields the unbounded sentinel band, which
    makes every downstream quantity collapse to its unclipped counterpart.
    """

    test: GaussianBinaryTest
    eps: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("clipping band must satisfy lower < upper")

    @property
    def is_unclipped(self) -> bool:
        return math.isinf(self.lower) and math.isinf(self.upper)

    @property
    def c0(self) -> float:
        return math.exp(-self.lower)

    @property
    def c1(self) -> float:
        return math.exp(self.upper)


def unclipped(test: GaussianBinaryTest) -> ClippedLrtParams:
    return ClippedLrtParams(test, 0.0, float("-inf"), float("inf"))


def support_interval(test: GaussianBinaryTest) -> tuple[float, float]:
    """Quadrature support covering all but a negligible tail of both laws."""
    smax = max(test.std(0), test.std(1))
    return (min(test.mu0, test.mu1) - 10.0 * smax, max(test.mu0, test.mu1) + 10.0 * smax)


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        x1 = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + x1)
        xr = 0.5 * (x1 + x2)
        fl = f(xl)
        fr = f(xr)
        left = simpson(x0, x1, f0, fl, f1)
        right = simpson(x1, x2, f1, fr, f2)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, f0, fl, f1, left, tol / 2.0, depth + 1) + recurse(
            x1, x2, f1, fr, f2, right, tol / 2.0, depth + 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def lfd_log_densities(params: ClippedLrtParams, y):
    """Log of the least-favorable pair (log q0, log q1), evaluated pointwise.

    The max form keeps everything in log space, so tails never underflow.
    """
    lp0, lp1 = log_densities(params.test, y)
    log_keep = math.log1p(-params.eps)
    lq0 = log_keep + np.maximum(lp0, lp1 - params.upper)
    lq1 = log_keep + np.maximum(lp1, lp0 + params.lower)
    return lq0, lq1


def lfd_densities(params: ClippedLrtParams, y):
    lq0, lq1 = lfd_log_densities(params, y)
    return np.exp(lq0), np.exp(lq1)


def clipped_llr(params: ClippedLrtParams, test: GaussianBinaryTest, y):
    """Nominal log-likelihood ratio clamped to the clipping band.

    Identical to log(q1(y)/q0(y)) for the solved least-favorable pair.
    """
    return np.clip(llr(test, y), params.lower, params.upper)


def _bisect_root(f, lo: float, hi: float, iters: int = 200, xtol: float = 1e-13) -> float:
    """Root of a decreasing scalar function, with bracket expansion."""
    width = max(1.0, hi - lo)
    for _ in range(60):
        if f(hi) <= 0.0:
            break
        lo = hi
        hi += width
        width *= 2.0
    else:
        raise LfdConvergenceError("failed to bracket the normalization root from above")
    width = max(1.0, hi - lo)
    for _ in range(60):
        if f(lo) >= 0.0:
            break
        hi = lo
        lo -= width
        width *= 2.0
    else:
        raise LfdConvergenceError("failed to bracket the normalization root from below")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)


def solve_lfd_eps(test: GaussianBinaryTest, eps: float, tol: float = 1e-8) -> ClippedLrtParams:
    """Solve the clipping band so both least-favorable densities normalize.

    The two normalization conditions decouple: the integral of q0 depends
    only on the upper bound and is strictly decreasing in it, and likewise
    for q1 and the lower bound, so each condition is solved by bisection on
    its quadrature residual. Raises when eps is large enough that the
    resulting bounds cross (overlapping uncertainty bands).
    """
    if not 0.0 <= eps < 0.5:
        raise ValueError("eps must lie in [0, 0.5)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if eps == 0.0:
        return unclipped(test)

    a, b = support_interval(test)
    quad_tol = min(tol * 0.01, 1e-10)
    log_keep = math.log1p(-eps)
    lc0 = -0.5 * math.log(2.0 * math.pi * test.var0)
    lc1 = -0.5 * math.log(2.0 * math.pi * test.var1)
    mu0, mu1, v0, v1 = test.mu0, test.mu1, test.var0, test.var1

    # scalar fast paths of lfd_log_densities, one clipping side at a time
    def mass_q0(upper: float) -> float:
        def f(y):
            lp0 = lc0 - 0.5 * (y - mu0) ** 2 / v0
            lp1 = lc1 - 0.5 * (y - mu1) ** 2 / v1
            return math.exp(log_keep + max(lp0, lp1 - upper))

        return adaptive_simpson(f, a, b, quad_tol)

    def mass_q1(lower: float) -> float:
        def f(y):
            lp0 = lc0 - 0.5 * (y - mu0) ** 2 / v0
            lp1 = lc1 - 0.5 * (y - mu1) ** 2 / v1
            return math.exp(log_keep + max(lp1, lp0 + lower))

        return adaptive_simpson(f, a, b, quad_tol)

    upper = _bisect_root(lambda c: mass_q0(c) - 1.0, -1.0, 1.0)
    # the q1 residual increases in the lower bound; negate for the helper
    lower = _bisect_root(lambda c: 1.0 - mass_q1(c), -1.0, 1.0)
    if not lower < upper:
        raise LfdBandError(
            f"contamination eps={eps} leaves no valid clipping band "
            f"(bounds {lower:.6g} >= {upper:.6g}); the uncertainty sets overlap"
        )
    params = ClippedLrtParams(test, eps, lower, upper)
    r0 = abs(mass_q0(upper) - 1.0)
    r1 = abs(mass_q1(lower) - 1.0)
    if max(r0, r1) > tol:
        raise LfdConvergenceError(
            f"normalization residuals ({r0:.3g}, {r1:.3g}) exceed tol={tol}"
        )
    return params


def _q_tail(x: float) -> float:
    """Gaussian tail probability Q(x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _phi(x: float) -> float:
    """Standard normal distribution function."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def llr_cdf(test: GaussianBinaryTest, hypothesis: int, x: float) -> float:
    """Exact P(llr(Y) <= x) under the nominal law of the given hypothesis.

    The ratio is a quadratic in the measurement, so the event is a half-line
    (equal variances) or an interval / interval complement (unequal
    variances), and the probability reduces to Gaussian distribution values.
    """
    a2 = 0.5 * (1.0 / test.var0 - 1.0 / test.var1)
    a1 = test.mu1 / test.var1 - test.mu0 / test.var0
    a0 = 0.5 * (test.mu0 ** 2 / test.var0 - test.mu1 ** 2 / test.var1) + 0.5 * math.log(
        test.var0 / test.var1
    )
    mean = test.mean(hypothesis)
    std = test.std(hypothesis)
    if math.isinf(x):
        return 0.0 if x < 0 else 1.0
    if a2 == 0.0:
        # affine ratio; a1 != 0 because the test is non-degenerate
        y = (x - a0) / a1
        z = (y - mean) / std
        return _phi(z) if a1 > 0 else 1.0 - _phi(z)
    # quadratic: {y : a2 y^2 + a1 y + a0 - x <= 0}
    disc = a1 * a1 - 4.0 * a2 * (a0 - x)
    if disc <= 0.0:
        return 0.0 if a2 > 0 else 1.0
    root = math.sqrt(disc)
    y_lo = (-a1 - root) / (2.0 * a2)
    y_hi = (-a1 + root) / (2.0 * a2)
    if y_lo > y_hi:
        y_lo, y_hi = y_hi, y_lo
    inside = _phi((y_hi - mean) / std) - _phi((y_lo - mean) / std)
    return inside if a2 > 0 else 1.0 - inside


@dataclass(frozen=True)
class ExcessMass:
    """Probability masses of the clamped ratio at the band edges.

    Index i is the hypothesis: ``a0[i]`` sits at the lower bound, ``a1[i]``
    at the upper bound, and ``a2[i]`` is the uniform density level spread
    over the interior, so a0 + a1 + a2*(C1 - C0) = 1.
    """

    a0: tuple[float, float]
    a1: tuple[float, float]
    a2: tuple[float, float]


def excess_masses(
    params: ClippedLrtParams,
    test: GaussianBinaryTest | None = None,
    eps: float | None = None,
    *,
    mode: str = "gaussian",
    use_std: bool = False,
) -> ExcessMass:
    """Edge masses of the clamped log-likelihood ratio under each hypothesis.

    Worst-case outliers pile up at the edge favoring the wrong hypothesis:
    the full contamination mass joins the lower edge under H1 and the upper
    edge under H0. The default nominal contribution uses a Gaussian tail
    evaluated at the unclipped ratio moments, with the variance in the
    denominator (see module docstring); ``use_std`` switches to
    standard-deviation scaling. ``mode="exact"`` uses the exact distribution
    of the ratio instead - for skewed (unequal-variance) ratios the Gaussian
    approximation can be badly off.
    """
    test = params.test if test is None else test
    eps = params.eps if eps is None else eps
    if mode not in ("gaussian", "exact"):
        raise ValueError(f"unknown edge-mass mode {mode!r}")
    if params.is_unclipped:
        return ExcessMass((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    if params.upper == params.lower:
        raise ValueError("degenerate clipping band")
    mom = llr_moments(test)
    a0 = []
    a1 = []
    a2 = []
    width = params.upper - params.lower
    for i in (0, 1):
        if mode == "exact":
            p_lo = llr_cdf(test, i, params.lower)
            p_hi = 1.0 - llr_cdf(test, i, params.upper)
        else:
            mean = mom.mean1 if i else mom.mean0
            var = mom.var1 if i else mom.var0
            denom = math.sqrt(var) if use_std else var
            p_lo = _q_tail(-(params.lower - mean) / denom)
            p_hi = _q_tail((params.upper - mean) / denom)
        lo = (1.0 - eps) * p_lo + (eps if i == 1 else 0.0)
        hi = (1.0 - eps) * p_hi + (eps if i == 0 else 0.0)
        a0.append(lo)
        a1.append(hi)
        a2.append((1.0 - lo - hi) / width)
    return ExcessMass(tuple(a0), tuple(a1), tuple(a2))


@dataclass(frozen=True)
class ClippedLlrMoments:
    """Moments of the clamped ratio; field names match the plain moments so
    threshold design accepts either."""

    mean0: float
    mean1: float
    var0: float
    var1: float


def clipped_llr_moments(masses: ExcessMass, params: ClippedLrtParams) -> ClippedLlrMoments:
    """Moments of the edge-mass-plus-uniform-interior approximation.

    With the unclipped sentinel band these are exactly the plain ratio
    moments, so the robust pipeline degrades to the plain one at eps = 0.
    """
    if params.is_unclipped:
        m = llr_moments(params.test)
        return ClippedLlrMoments(m.mean0, m.mean1, m.var0, m.var1)
    c0, c1 = params.lower, params.upper
    out = []
    for i in (0, 1):
        mean = (
            masses.a0[i] * c0
            + masses.a1[i] * c1
            + masses.a2[i] * (c1 ** 2 - c0 ** 2) / 2.0
        )
        second = (
            masses.a0[i] * c0 ** 2
            + masses.a1[i] * c1 ** 2
            + masses.a2[i] * (c1 ** 3 - c0 ** 3) / 3.0
        )
        out.append((mean, second - mean ** 2))
    return ClippedLlrMoments(out[0][0], out[1][0], out[0][1], out[1][1])
