"""Benchmark the neighborhood-estimate kernels, compiled vs pure python.

Usage: python -m netsprt.bench [--runs 2000] [--nodes 20] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from . import kernels
from .estimators import HuberConfig, MyriadConfig
from .network import equal_weight_matrix, generate_geometric_graph

KINDS = ("mean", "median", "huber", "myriad")


def _time_backend(backend, eta, indptr, indices, kind, myriad, repeat) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        kernels.neighborhood_estimates(
            eta, indptr, indices, kind, HuberConfig(), myriad, backend=backend
        )
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=2000)
    parser.add_argument("--nodes", type=int, default=20)
    parser.add_argument("--radius", type=float, default=0.6)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--myriad-grid", type=int, default=64)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    graph = generate_geometric_graph(args.nodes, args.radius, rng)
    equal_weight_matrix(graph)  # sanity: the topology is usable
    indptr, indices = graph.closed_neighborhoods()
    eta = rng.standard_normal((args.runs, args.nodes))
    eta[rng.random(eta.shape) < 0.1] *= 10.0  # sprinkle outliers
    myriad = MyriadConfig(grid_points=args.myriad_grid)

    print(f"batch: {args.runs} runs x {args.nodes} nodes, "
          f"degrees {np.diff(indptr).min()}..{np.diff(indptr).max()}")
    print(f"compiled kernel available: {kernels.HAVE_COMPILED}")
    header = f"{'kind':<8} {'python':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for kind in KINDS:
        t_py = _time_backend("python", eta, indptr, indices, kind, myriad, args.repeat)
        if kernels.HAVE_COMPILED:
            t_c = _time_backend("compiled", eta, indptr, indices, kind, myriad, args.repeat)
            print(f"{kind:<8} {t_py * 1e3:>10.2f}ms {t_c * 1e3:>10.2f}ms {t_py / t_c:>8.1f}x")
        else:
            print(f"{kind:<8} {t_py * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>9}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
