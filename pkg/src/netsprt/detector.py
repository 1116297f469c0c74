"""Per-agent sequential detectors over a sensor network.

Every agent carries a running statistic. Each step the plain detector mixes
neighbors' statistics and fresh log-likelihood ratios through the combination
weights; the clipped variant does the same with ratios pre-clamped to the
least-favorable band; the estimator-based variants mix only the statistics
and add a robust location estimate of the neighborhood's raw ratios.

An agent stops the first time its statistic leaves (lower, upper), deciding
H0 at the lower threshold and H1 at the upper (inclusive comparisons).
Stopped agents freeze their decision and stopping time but keep updating and
sharing their statistic, so the network-wide recursion stays well-defined.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .estimators import HuberConfig, MyriadConfig
from .hypothesis import GaussianBinaryTest
from .kernels import neighborhood_estimates
from .lfd import ClippedLrtParams
from .network import CombinationMatrix, SensorGraph
from .thresholds import Thresholds

__all__ = [
    "VariantKind",
    "Variant",
    "VariantSuitabilityError",
    "AgentState",
    "DecisionRecord",
    "NetworkDetector",
]


class VariantKind(str, Enum):
    PLAIN = "plain"
    LFD = "lfd"
    MEAN = "mean"
    MEDIAN = "median"
    HUBER = "huber"
    MYRIAD = "myriad"


ESTIMATOR_KINDS = (VariantKind.MEAN, VariantKind.MEDIAN, VariantKind.HUBER, VariantKind.MYRIAD)


class VariantSuitabilityError(ValueError):
    """Estimator variant incompatible with the test's ratio distribution."""


@dataclass(frozen=True)
class Variant:
    """Detector flavor plus the parameters it needs."""

    kind: VariantKind
    clip: ClippedLrtParams | None = None
    huber: HuberConfig = field(default_factory=HuberConfig)
    myriad: MyriadConfig = field(default_factory=MyriadConfig)

    def __post_init__(self):
        if self.kind == VariantKind.LFD and self.clip is None:
            raise ValueError("clipped variant needs the solved clipping band")

    @property
    def is_estimator_based(self) -> bool:
        return self.kind in ESTIMATOR_KINDS

    @staticmethod
    def plain() -> "Variant":
        return Variant(VariantKind.PLAIN)

    @staticmethod
    def lfd(clip: ClippedLrtParams) -> "Variant":
        return Variant(VariantKind.LFD, clip=clip)

    @staticmethod
    def estimator(
        kind: str | VariantKind,
        test: GaussianBinaryTest | None = None,
        *,
        allow_skewed_llr: bool = False,
        huber: HuberConfig | None = None,
        myriad: MyriadConfig | None = None,
    ) -> "Variant":
        """Estimator-based variant, validated against the test.

        The median estimates the mean reliably only for symmetric input, so
        the median variant is rejected whenever the test's log-likelihood
        ratio is skewed (unequal variances), unless ``allow_skewed_llr`` is
        set for replication studies.
        """
        kind = VariantKind(kind)
        if kind not in ESTIMATOR_KINDS:
            raise ValueError(f"{kind.value!r} is not an estimator-based variant")
        if (
            kind == VariantKind.MEDIAN
            and test is not None
            and not test.llr_is_gaussian
            and not allow_skewed_llr
        ):
            raise VariantSuitabilityError(
                "the median variant requires a symmetric log-likelihood ratio; "
                "with unequal variances the ratio is skewed (chi-square-like), "
                "so the median no longer estimates its mean. Pass "
                "allow_skewed_llr=True to override."
            )
        return Variant(
            kind,
            huber=huber if huber is not None else HuberConfig(),
            myriad=myriad if myriad is not None else MyriadConfig(),
        )


@dataclass(frozen=True)
class AgentState:
    statistic: float
    stopped: bool
    decision: int | None
    stopping_time: int | None


@dataclass(frozen=True)
class DecisionRecord:
    node: int
    decision: int | None
    stopping_time: int | None
    truncated: bool
    statistic: float


class NetworkDetector:
    """Mutable network state machine; owned by a single run."""

    def __init__(
        self,
        graph: SensorGraph,
        w: CombinationMatrix,
        thresholds: Thresholds,
        variant: Variant,
    ):
        if w.n != graph.n:
            raise ValueError(f"weight matrix size {w.n} does not match {graph.n} nodes")
        w.check_support(graph)
        self.graph = graph
        self.w = w
        self.thresholds = thresholds
        self.variant = variant
        self._indptr, self._indices = graph.closed_neighborhoods()
        self.n = graph.n
        self.t = 0
        self.statistic = np.zeros(self.n)
        self.stopped = np.zeros(self.n, dtype=bool)
        self.decision = np.full(self.n, -1, dtype=np.int8)
        self.stop_time = np.zeros(self.n, dtype=np.int64)

    @property
    def all_stopped(self) -> bool:
        return bool(self.stopped.all())

    def agents(self) -> list[AgentState]:
        return [
            AgentState(
                float(self.statistic[k]),
                bool(self.stopped[k]),
                int(self.decision[k]) if self.stopped[k] else None,
                int(self.stop_time[k]) if self.stopped[k] else None,
            )
            for k in range(self.n)
        ]

    def step(self, innovations) -> "NetworkDetector":
        """Advance one time instant with the given per-node innovations.

        For the plain and clipped variants the innovations are the (possibly
        pre-clipped) per-node log-likelihood ratios entering the weighted
        average; for estimator variants they are the raw ratios from which
        each node's neighborhood estimate is formed.
        """
        eta = np.asarray(innovations, dtype=float)
        if eta.shape != (self.n,):
            raise ValueError(f"expected {self.n} innovations, got shape {eta.shape}")
        if self.all_stopped:
            raise RuntimeError("all agents have stopped")
        if self.variant.is_estimator_based:
            est = neighborhood_estimates(
                eta[None, :],
                self._indptr,
                self._indices,
                self.variant.kind.value,
                self.variant.huber,
                self.variant.myriad,
            )[0]
            self.statistic = self.w.w @ self.statistic + est
        else:
            self.statistic = self.w.w @ (self.statistic + eta)
        self.t += 1
        newly = ~self.stopped & (
            (self.statistic <= self.thresholds.lower) | (self.statistic >= self.thresholds.upper)
        )
        if newly.any():
            idx = np.flatnonzero(newly)
            self.decision[idx] = (self.statistic[idx] >= self.thresholds.upper).astype(np.int8)
            self.stop_time[idx] = self.t
            self.stopped[idx] = True
        return self

    def run_until_all_stop(self, innovations_source, t_max: int = 100_000) -> list[DecisionRecord]:
        """Step until every agent has stopped or ``t_max`` is reached.

        ``innovations_source`` is called with the upcoming time index
        (1-based) and must return the per-node innovations for that step.
        Agents still undecided at ``t_max`` are reported as truncated.
        """
        if t_max < 1:
            raise ValueError("t_max must be >= 1")
        while not self.all_stopped and self.t < t_max:
            self.step(innovations_source(self.t + 1))
        return [
            DecisionRecord(
                node=k,
                decision=int(self.decision[k]) if self.stopped[k] else None,
                stopping_time=int(self.stop_time[k]) if self.stopped[k] else None,
                truncated=not bool(self.stopped[k]),
                statistic=float(self.statistic[k]),
            )
            for k in range(self.n)
        ]
