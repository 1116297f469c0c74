"""Robust location estimators for neighborhood innovation vectors.

Each detector variant reduces the log-likelihood ratios observed in a node's
closed neighborhood to a single innovation value. The sample mean is the
non-robust baseline; median, Huber M-estimation with MAD scale, and the
sample myriad bound the influence of outliers at increasing computational
cost. All estimators are plain functions of a 1-D sample.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HuberConfig",
    "MyriadConfig",
    "HuberConvergenceWarning",
    "sample_mean",
    "median",
    "mad_scale",
    "huber_m",
    "myriad",
]

# MAD-to-sigma factor for Gaussian consistency.
MAD_NORMALIZATION = 1.483

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


class HuberConvergenceWarning(RuntimeWarning):
    """Reweighting iteration hit the iteration cap before converging."""


@dataclass(frozen=True)
class HuberConfig:
    """Clipping constant (95% Gaussian efficiency default), relative
    convergence tolerance and iteration cap."""

    c: float = 1.345
    tol: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        if self.c <= 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("invalid Huber configuration")


@dataclass(frozen=True)
class MyriadConfig:
    """Myriad tuning.

    ``m_mode="mad"`` derives the linearity parameter from the sample MAD
    (falling back to the median when the MAD is zero); ``m_mode="fixed"``
    uses ``m_value``. The minimizer is located by a dense grid over the
    sample hull followed by golden-section refinement.
    """

    m_mode: str = "mad"
    m_value: float = float("nan")
    grid_points: int = 2048
    refine_tol: float = 1e-6

    def __post_init__(self):
        if self.m_mode not in ("mad", "fixed"):
            raise ValueError("m_mode must be 'mad' or 'fixed'")
        if self.m_mode == "fixed" and not self.m_value > 0:
            raise ValueError("fixed mode needs m_value > 0")
        if self.grid_points < 2 or self.refine_tol <= 0:
            raise ValueError("invalid myriad search configuration")


def _as_sample(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    if arr.size < 1:
        raise ValueError("need at least one value")
    if not np.isfinite(arr).all():
        raise ValueError("sample must be finite")
    return arr


def sample_mean(v) -> float:
    return float(np.mean(_as_sample(v)))


def median(v) -> float:
    """Middle order statistic; mean of the two middle ones for even length."""
    arr = np.sort(_as_sample(v))
    n = arr.size
    if n % 2:
        return float(arr[n // 2])
    return float(0.5 * (arr[n // 2 - 1] + arr[n // 2]))


def mad_scale(v) -> float:
    """Normalized median absolute deviation from the median."""
    arr = _as_sample(v)
    return MAD_NORMALIZATION * median(np.abs(arr - median(arr)))


def huber_m(v, cfg: HuberConfig = HuberConfig()) -> float:
    """Huber M-estimate of location via iterative reweighting.

    Initialized at the median with MAD scale; a zero scale (constant sample,
    or more than half the points identical) degenerates to the median.
    """
    arr = _as_sample(v)
    mu = median(arr)
    scale = mad_scale(arr)
    if scale == 0.0:
        return mu
    for _ in range(cfg.max_iter):
        absr = np.abs(arr - mu) / scale
        w = np.ones_like(absr)
        clipped = absr > cfg.c
        w[clipped] = cfg.c / absr[clipped]
        mu_new = float(np.sum(w * arr) / np.sum(w))
        done = abs(mu_new - mu) / scale < cfg.tol
        mu = mu_new
        if done:
            return mu
    warnings.warn("Huber M-estimate did not converge", HuberConvergenceWarning)
    return mu


def _myriad_cost(arr: np.ndarray, m2: float, norm: float, eta) -> np.ndarray:
    """Product-form myriad objective, each factor normalized to [0, 1]."""
    eta = np.asarray(eta, dtype=float)
    cost = np.ones_like(eta)
    for x in arr:
        cost = cost * ((m2 + (x - eta) ** 2) / norm)
    return cost


def myriad(v, cfg: MyriadConfig = MyriadConfig()) -> float:
    """Sample myriad: the minimizer over eta of prod(m^2 + (x_l - eta)^2).

    Small m is mode-seeking, large m approaches the sample mean. The search
    is a dense grid over [min, max] plus golden-section refinement around the
    best grid point; grid ties break toward the point closest to the median.
    The result always lies inside the sample hull.
    """
    arr = _as_sample(v)
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        return lo
    if cfg.m_mode == "fixed":
        m = cfg.m_value
    else:
        m = mad_scale(arr)
        if m == 0.0:
            return median(arr)
    m2 = m * m
    span = hi - lo
    norm = m2 + span * span
    grid = np.linspace(lo, hi, cfg.grid_points)
    cost = _myriad_cost(arr, m2, norm, grid)
    best = cost.min()
    med = median(arr)
    tie_dist = np.where(cost == best, np.abs(grid - med), np.inf)
    j = int(np.argmin(tie_dist))
    step = span / (cfg.grid_points - 1)
    a = max(lo, grid[j] - step)
    b = min(hi, grid[j] + step)
    return _golden_refine(arr, m2, norm, a, b, cfg.refine_tol * span)


def _golden_refine(arr, m2, norm, a, b, width_tol) -> float:
    """Golden-section minimization of the myriad objective on [a, b]."""
    x1 = b - GOLDEN_RATIO * (b - a)
    x2 = a + GOLDEN_RATIO * (b - a)
    f1 = _myriad_cost(arr, m2, norm, x1)
    f2 = _myriad_cost(arr, m2, norm, x2)
    while b - a > width_tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN_RATIO * (b - a)
            f1 = _myriad_cost(arr, m2, norm, x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN_RATIO * (b - a)
            f2 = _myriad_cost(arr, m2, norm, x2)
    return 0.5 * (a + b)
