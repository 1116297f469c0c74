"""Vectorized numpy fallback for the neighborhood-estimate kernels.

Semantics mirror the scalar functions in ``estimators`` exactly; the batch
layout is (runs, nodes) with a shared CSR neighborhood structure. This is
the import-time fallback when the compiled extension is unavailable.
"""
from __future__ import annotations

import math

import numpy as np

from .estimators import GOLDEN_RATIO, MAD_NORMALIZATION

KIND_MEAN = 0
KIND_MEDIAN = 1
KIND_HUBER = 2
KIND_MYRIAD = 3


def _huber_rows(vals: np.ndarray, c: float, tol: float, max_iter: int) -> np.ndarray:
    med = np.median(vals, axis=1)
    mad = MAD_NORMALIZATION * np.median(np.abs(vals - med[:, None]), axis=1)
    out = med.copy()
    act = np.flatnonzero(mad > 0)
    if act.size == 0:
        return out
    sub = vals[act]
    scale = mad[act]
    mu = out[act].copy()
    done = np.zeros(act.size, dtype=bool)
    for _ in range(max_iter):
        todo = np.flatnonzero(~done)
        if todo.size == 0:
            break
        x = sub[todo]
        s = scale[todo]
        absr = np.abs(x - mu[todo][:, None]) / s[:, None]
        w = np.ones_like(absr)
        big = absr > c
        w[big] = c / absr[big]
        mu_new = (w * x).sum(axis=1) / w.sum(axis=1)
        done[todo] = np.abs(mu_new - mu[todo]) / s < tol
        mu[todo] = mu_new
    out[act] = mu
    return out


def _myriad_cost_at(sub: np.ndarray, m2: np.ndarray, norm: np.ndarray, x: np.ndarray) -> np.ndarray:
    cost = np.ones_like(x)
    for j in range(sub.shape[1]):
        cost = cost * ((m2 + (sub[:, j] - x) ** 2) / norm)
    return cost


def _myriad_rows(vals: np.ndarray, m_fixed: float, grid_points: int, refine_tol: float) -> np.ndarray:
    lo = vals.min(axis=1)
    hi = vals.max(axis=1)
    med = np.median(vals, axis=1)
    out = med.copy()
    span = hi - lo
    if math.isnan(m_fixed):
        m = MAD_NORMALIZATION * np.median(np.abs(vals - med[:, None]), axis=1)
        active = (span > 0) & (m > 0)  # zero MAD degenerates to the median
    else:
        m = np.full(vals.shape[0], m_fixed)
        active = span > 0
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return out
    sub = vals[idx]
    l, sp, md = lo[idx], span[idx], med[idx]
    m2 = m[idx] ** 2
    norm = m2 + sp ** 2
    base = np.linspace(0.0, 1.0, grid_points)
    grid = l[:, None] + sp[:, None] * base[None, :]
    cost = np.ones_like(grid)
    for j in range(sub.shape[1]):
        cost = cost * ((m2[:, None] + (sub[:, j, None] - grid) ** 2) / norm[:, None])
    best = cost.min(axis=1)
    dist = np.where(cost == best[:, None], np.abs(grid - md[:, None]), np.inf)
    jj = np.argmin(dist, axis=1)
    step = sp / (grid_points - 1)
    gj = np.take_along_axis(grid, jj[:, None], axis=1)[:, 0]
    a = np.maximum(l, gj - step)
    b = np.minimum(hi[idx], gj + step)
    # fixed iteration count: the start width over the target width is
    # bounded by 2 / ((grid_points - 1) * refine_tol) for every row
    ratio = 2.0 / ((grid_points - 1) * refine_tol)
    n_iter = max(0, int(math.ceil(math.log(max(ratio, 1.0)) / -math.log(GOLDEN_RATIO))))
    for _ in range(n_iter):
        width = b - a
        x1 = b - GOLDEN_RATIO * width
        x2 = a + GOLDEN_RATIO * width
        f1 = _myriad_cost_at(sub, m2, norm, x1)
        f2 = _myriad_cost_at(sub, m2, norm, x2)
        sel = f1 <= f2
        b = np.where(sel, x2, b)
        a = np.where(sel, a, x1)
    out[idx] = 0.5 * (a + b)
    return out


def estimate_batch(
    eta: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    kind: int,
    huber_c: float,
    huber_tol: float,
    huber_max_iter: int,
    myriad_m: float,
    myriad_grid: int,
    myriad_refine_tol: float,
) -> np.ndarray:
    n = indptr.shape[0] - 1
    out = np.empty_like(eta)
    for k in range(n):
        vals = eta[:, indices[indptr[k] : indptr[k + 1]]]
        if kind == KIND_MEAN:
            out[:, k] = vals.mean(axis=1)
        elif kind == KIND_MEDIAN:
            out[:, k] = np.median(vals, axis=1)
        elif kind == KIND_HUBER:
            out[:, k] = _huber_rows(vals, huber_c, huber_tol, huber_max_iter)
        elif kind == KIND_MYRIAD:
            out[:, k] = _myriad_rows(vals, myriad_m, myriad_grid, myriad_refine_tol)
        else:
            raise ValueError(f"unknown kernel kind {kind}")
    return out
