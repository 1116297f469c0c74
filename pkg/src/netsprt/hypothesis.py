"""Gaussian binary hypothesis models and their log-likelihood ratios.

The detection problems handled by this package are binary tests between two
Gaussian measurement models, H0: N(mu0, var0) vs H1: N(mu1, var1). Two named
shapes cover the experiments shipped with the package:

* shift-in-mean: different means, one shared variance,
* shift-in-variance: zero means, variance ``noise`` vs ``signal + noise``.

Measurement noise may be contaminated: with probability ``epsilon`` a sample
is drawn from an outlier Gaussian (by default the nominal one with its
variance inflated by ``kappa``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianBinaryTest",
    "LlrMoments",
    "ContaminationModel",
    "TrueState",
    "llr",
    "llr_moments",
    "sample_measurement",
]


@dataclass(frozen=True)
class GaussianBinaryTest:
    """A pair of Gaussian hypotheses (mu0, var0) vs (mu1, var1)."""

    mu0: float
    mu1: float
    var0: float
    var1: float

    def __post_init__(self):
        if self.var0 <= 0 or self.var1 <= 0:
            raise ValueError("variances must be positive")
        if self.mu0 == self.mu1 and self.var0 == self.var1:
            raise ValueError("hypotheses must differ in mean or variance")

    @classmethod
    def shift_in_mean(cls, mu0: float, mu1: float, sigma2: float) -> "GaussianBinaryTest":
        """Test for the mean with a shared variance under both hypotheses."""
        if mu0 == mu1:
            raise ValueError("shift-in-mean test needs distinct means")
        return cls(mu0, mu1, sigma2, sigma2)

    @classmethod
    def shift_in_variance(cls, sigma_x2: float, sigma_n2: float) -> "GaussianBinaryTest":
        """Presence/absence of a zero-mean signal with power ``sigma_x2`` in
        noise of power ``sigma_n2``."""
        if sigma_x2 <= 0:
            raise ValueError("signal power must be positive")
        return cls(0.0, 0.0, sigma_n2, sigma_x2 + sigma_n2)

    def mean(self, hypothesis: int) -> float:
        return self.mu1 if hypothesis else self.mu0

    def var(self, hypothesis: int) -> float:
        return self.var1 if hypothesis else self.var0

    def std(self, hypothesis: int) -> float:
        return math.sqrt(self.var(hypothesis))

    @property
    def llr_is_gaussian(self) -> bool:
        """True when the log-likelihood ratio of a measurement is Gaussian.

        This holds exactly when both hypotheses share one variance (the ratio
        is then affine in y). With distinct variances the ratio is a scaled
        and shifted chi-square with one degree of freedom, i.e. skewed - which
        matters for estimators that assume a symmetric distribution.
        """
        return self.var0 == self.var1


@dataclass(frozen=True)
class LlrMoments:
    """Mean and variance of the per-sample log-likelihood ratio under each
    hypothesis. ``mean0 < 0 < mean1`` for any non-degenerate test."""

    mean0: float
    mean1: float
    var0: float
    var1: float


def log_densities(test: GaussianBinaryTest, y):
    """Log densities (log p0(y), log p1(y)) of the two nominal laws."""
    y = np.asarray(y, dtype=float)
    lp0 = -0.5 * (np.log(2.0 * np.pi * test.var0) + (y - test.mu0) ** 2 / test.var0)
    lp1 = -0.5 * (np.log(2.0 * np.pi * test.var1) + (y - test.mu1) ** 2 / test.var1)
    return lp0, lp1


def llr(test: GaussianBinaryTest, y):
    """Log-likelihood ratio log(p1(y)/p0(y)) for a measurement (vectorized)."""
    y = np.asarray(y, dtype=float)
    out = (
        0.5 * ((y - test.mu0) ** 2 / test.var0 - (y - test.mu1) ** 2 / test.var1)
        + 0.5 * math.log(test.var0 / test.var1)
    )
    return out if out.ndim else float(out)


def llr_moments(test: GaussianBinaryTest) -> LlrMoments:
    """Closed-form moments of the log-likelihood ratio under H0 and H1."""
    dmu2 = (test.mu0 - test.mu1) ** 2
    v0, v1 = test.var0, test.var1
    half_log_ratio = 0.5 * math.log(v0 / v1)
    mean0 = -(dmu2 + v0 - v1) / (2.0 * v1) + half_log_ratio
    mean1 = (dmu2 + v1 - v0) / (2.0 * v0) + half_log_ratio
    var0 = 0.5 * (1.0 + v0 ** 2 / v1 ** 2) + dmu2 * v0 / v1 ** 2 - v0 / v1
    var1 = 0.5 * (1.0 + v1 ** 2 / v0 ** 2) + dmu2 * v1 / v0 ** 2 - v1 / v0
    return LlrMoments(mean0, mean1, var0, var1)


@dataclass(frozen=True)
class ContaminationModel:
    """Epsilon-contamination of the measurement noise.

    A sample is an outlier with probability ``epsilon``; outliers come from a
    Gaussian with the true mean and ``kappa`` times the true variance, unless
    an explicit ``contaminant`` (mean, var) pair is given.
    """

    epsilon: float
    kappa: float = 10.0
    contaminant: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.contaminant is None and self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.contaminant is not None and self.contaminant[1] <= 0:
            raise ValueError("contaminant variance must be positive")

    def outlier_params(self, nominal_mean: float, nominal_var: float) -> tuple[float, float]:
        """(mean, std) of the outlier distribution for a given nominal law."""
        if self.contaminant is not None:
            m, v = self.contaminant
            return m, math.sqrt(v)
        return nominal_mean, math.sqrt(self.kappa * nominal_var)


CLEAN = ContaminationModel(epsilon=0.0)


@dataclass(frozen=True)
class TrueState:
    """The hypothesis actually in force, with the implied nominal law."""

    test: GaussianBinaryTest
    hypothesis: int

    def __post_init__(self):
        if self.hypothesis not in (0, 1):
            raise ValueError("hypothesis index must be 0 or 1")

    @property
    def mean(self) -> float:
        return self.test.mean(self.hypothesis)

    @property
    def var(self) -> float:
        return self.test.var(self.hypothesis)

    @property
    def std(self) -> float:
        return self.test.std(self.hypothesis)


def sample_measurement(state: TrueState, cm: ContaminationModel, rng: np.random.Generator, size=None):
    """Draw measurements under the true hypothesis with contamination.

    The draw protocol is fixed (one uniform plus one standard normal per
    sample, in that order) so that a given generator state always yields the
    same measurements regardless of epsilon or the outlier parameters.
    """
    u = rng.random(size)
    z = rng.standard_normal(size)
    om, os_ = cm.outlier_params(state.mean, state.var)
    nominal = state.mean + state.std * z
    outlier = om + os_ * z
    out = np.where(u < cm.epsilon, outlier, nominal)
    return out if np.ndim(out) else float(out)
