"""Lockstep batch simulator behind the Monte Carlo harness.

All runs of a chunk advance together as (runs, nodes) arrays; a run leaves
the batch once every one of its agents has stopped. Measurements come from
per-run generators seeded by (master seed, run index) and are drawn in fixed
blocks, so a run's stream depends only on its own seed and lifetime - never
on chunking, execution order, or which backend computes the estimates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detector import Variant, VariantKind
from .hypothesis import ContaminationModel, GaussianBinaryTest, TrueState, llr, sample_measurement
from .kernels import neighborhood_estimates
from .lfd import clipped_llr
from .thresholds import Thresholds


@dataclass(frozen=True)
class SimSpec:
    """Everything one chunk needs to simulate its runs."""

    test: GaussianBinaryTest
    contamination: ContaminationModel
    hypothesis: int
    w: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    variant: Variant
    thresholds: Thresholds | None
    t_max: int
    block: int = 128
    backend: str | None = None


def _innovations(spec: SimSpec, y: np.ndarray) -> np.ndarray:
    if spec.variant.kind == VariantKind.LFD:
        return clipped_llr(spec.variant.clip, spec.test, y)
    return llr(spec.test, y)


def _step_statistic(spec: SimSpec, s: np.ndarray, eta: np.ndarray, wt: np.ndarray) -> np.ndarray:
    if spec.variant.is_estimator_based:
        est = neighborhood_estimates(
            eta,
            spec.indptr,
            spec.indices,
            spec.variant.kind.value,
            spec.variant.huber,
            spec.variant.myriad,
            backend=spec.backend,
        )
        return s @ wt + est
    return (s + eta) @ wt


def simulate_runs(spec: SimSpec, entropies: list[tuple]) -> tuple[np.ndarray, np.ndarray]:
    """Run each seed to a decision (or t_max); returns (stop_t, decision).

    ``stop_t`` is (runs, nodes) int32; ``decision`` is int8 with 1 for the
    upper threshold, 0 for the lower, -1 for truncated (undecided) agents.
    """
    if spec.thresholds is None:
        raise ValueError("simulate_runs needs thresholds")
    n_runs = len(entropies)
    n = spec.w.shape[0]
    gens = [np.random.default_rng(np.random.SeedSequence(e)) for e in entropies]
    state = TrueState(spec.test, spec.hypothesis)
    wt = np.ascontiguousarray(spec.w.T)
    lower, upper = spec.thresholds.lower, spec.thresholds.upper
    block = spec.block

    s = np.zeros((n_runs, n))
    stopped = np.zeros((n_runs, n), dtype=bool)
    decision = np.full((n_runs, n), -1, dtype=np.int8)
    stop_t = np.zeros((n_runs, n), dtype=np.int32)
    alive = np.ones(n_runs, dtype=bool)
    ybuf = np.empty((n_runs, block, n))

    for t in range(1, spec.t_max + 1):
        if not alive.any():
            break
        j = (t - 1) % block
        if j == 0:
            for r in np.flatnonzero(alive):
                ybuf[r] = sample_measurement(state, spec.contamination, gens[r], size=(block, n))
        ridx = np.flatnonzero(alive)
        eta = _innovations(spec, ybuf[ridx, j])
        s_new = _step_statistic(spec, s[ridx], eta, wt)
        s[ridx] = s_new
        newly = ~stopped[ridx] & ((s_new <= lower) | (s_new >= upper))
        if newly.any():
            rr, cc = np.nonzero(newly)
            gr = ridx[rr]
            decision[gr, cc] = (s_new[rr, cc] >= upper).astype(np.int8)
            stop_t[gr, cc] = t
            stopped[gr, cc] = True
            alive[ridx] = ~stopped[ridx].all(axis=1)
    return stop_t, decision


def snapshot_runs(spec: SimSpec, entropies: list[tuple], times: list[int]) -> dict[int, np.ndarray]:
    """Record the raw statistic at the requested times, with stopping
    disabled so every run contributes at every time."""
    times = sorted(set(int(t) for t in times))
    if not times:
        return {}
    if times[0] < 1:
        raise ValueError("snapshot times must be >= 1")
    n_runs = len(entropies)
    n = spec.w.shape[0]
    gens = [np.random.default_rng(np.random.SeedSequence(e)) for e in entropies]
    state = TrueState(spec.test, spec.hypothesis)
    wt = np.ascontiguousarray(spec.w.T)
    block = spec.block
    wanted = set(times)

    s = np.zeros((n_runs, n))
    ybuf = np.empty((n_runs, block, n))
    out: dict[int, np.ndarray] = {}
    for t in range(1, times[-1] + 1):
        j = (t - 1) % block
        if j == 0:
            for r in range(n_runs):
                ybuf[r] = sample_measurement(state, spec.contamination, gens[r], size=(block, n))
        eta = _innovations(spec, ybuf[:, j])
        s = _step_statistic(spec, s, eta, wt)
        if t in wanted:
            out[t] = s.copy()
    return out
