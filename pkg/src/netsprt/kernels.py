"""Backend selection for the neighborhood-estimate kernels.

The compiled extension is preferred when importable; the numpy fallback is
always available. Set ``NETSPRT_PURE_PYTHON=1`` to force the fallback, e.g.
to benchmark one backend against the other.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from .estimators import HuberConfig, MyriadConfig

try:
    from . import _kernels_c
except ImportError:
    _kernels_c = None

HAVE_COMPILED = _kernels_c is not None
if HAVE_COMPILED and os.environ.get("NETSPRT_PURE_PYTHON") != "1":
    DEFAULT_BACKEND = "compiled"
else:
    DEFAULT_BACKEND = "python"

_KINDS = {
    "mean": _kernels_py.KIND_MEAN,
    "median": _kernels_py.KIND_MEDIAN,
    "huber": _kernels_py.KIND_HUBER,
    "myriad": _kernels_py.KIND_MYRIAD,
}


def neighborhood_estimates(
    eta: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    kind: str,
    huber: HuberConfig = HuberConfig(),
    myriad: MyriadConfig = MyriadConfig(),
    backend: str | None = None,
) -> np.ndarray:
    """Per-(run, node) location estimates of the closed-neighborhood values.

    ``eta`` is (runs, nodes); the CSR pair (indptr, indices) lists each
    node's closed neighborhood.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown estimator kind {kind!r}")
    backend = backend or DEFAULT_BACKEND
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernel backend is not available")
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    eta = np.ascontiguousarray(eta, dtype=np.float64)
    indptr = np.ascontiguousarray(indptr, dtype=np.int32)
    indices = np.ascontiguousarray(indices, dtype=np.int32)
    myriad_m = myriad.m_value if myriad.m_mode == "fixed" else float("nan")
    impl = _kernels_c if backend == "compiled" else _kernels_py
    return impl.estimate_batch(
        eta,
        indptr,
        indices,
        _KINDS[kind],
        huber.c,
        huber.tol,
        huber.max_iter,
        myriad_m,
        myriad.grid_points,
        myriad.refine_tol,
    )
