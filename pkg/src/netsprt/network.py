"""Sensor-network topologies and consensus weight matrices.

Networks are simple, connected, undirected graphs. The default topology is a
random geometric graph: node positions i.i.d. uniform on the unit square,
with an edge whenever two nodes are within a given radius (ties included).
Disconnected layouts are discarded and redrawn wholesale, which preserves the
uniform position model conditional on connectivity.

The consensus stage uses a right-stochastic combination matrix W. Its mixing
quality enters the statistic-variance bound through a scalar ``xi`` that
upper-bounds the diagonal of W^m (W^T)^m.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SensorGraph",
    "CombinationMatrix",
    "XiBound",
    "GraphConnectivityError",
    "generate_geometric_graph",
    "equal_weight_matrix",
    "xi_bound",
    "graph_to_json",
    "graph_from_json",
]

ROW_SUM_TOL = 1e-12


class GraphConnectivityError(RuntimeError):
    """No connected layout found within the resample budget."""


def _check_edges(n: int, edges) -> frozenset[tuple[int, int]]:
    out = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self-loop at node {a}")
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"edge ({a},{b}) out of range for {n} nodes")
        out.add((min(a, b), max(a, b)))
    return frozenset(out)


def _connected(n: int, adj: list[list[int]]) -> bool:
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        k = stack.pop()
        for j in adj[k]:
            if not seen[j]:
                seen[j] = True
                count += 1
                stack.append(j)
    return count == n


@dataclass(frozen=True)
class SensorGraph:
    """Simple connected undirected graph, optionally with node positions."""

    n: int
    edges: frozenset[tuple[int, int]]
    positions: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one node")
        object.__setattr__(self, "edges", _check_edges(self.n, self.edges))
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=float)
            if pos.shape != (self.n, 2):
                raise ValueError("positions must be (n, 2)")
            object.__setattr__(self, "positions", pos)
        if self.n > 1 and not _connected(self.n, self.adjacency()):
            raise ValueError("graph is not connected")

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def neighbors(self, k: int) -> list[int]:
        """Open neighborhood of node k, sorted."""
        return sorted(j for j in self.adjacency()[k])

    def closed_neighborhoods(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR layout (indptr, indices) of the closed neighborhoods, each
        sorted and including the node itself."""
        adj = self.adjacency()
        indptr = np.zeros(self.n + 1, dtype=np.int32)
        indices = []
        for k in range(self.n):
            nb = sorted(adj[k] + [k])
            indices.extend(nb)
            indptr[k + 1] = indptr[k] + len(nb)
        return indptr, np.asarray(indices, dtype=np.int32)


def generate_geometric_graph(
    n: int,
    radius: float,
    rng: np.random.Generator,
    max_attempts: int = 10_000,
) -> SensorGraph:
    """Draw a connected random geometric graph on the unit square.

    The whole layout is resampled until connected; a layout that stays
    disconnected for ``max_attempts`` draws signals that the radius is too
    small for the requested node count.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if not 0.0 < radius <= np.sqrt(2.0):
        raise ValueError("radius must lie in (0, sqrt(2)]")
    for _ in range(max_attempts):
        pos = rng.random((n, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        close = dist <= radius
        edges = [(a, b) for a in range(n) for b in range(a + 1, n) if close[a, b]]
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        if _connected(n, adj):
            return SensorGraph(n, frozenset(edges), pos)
    raise GraphConnectivityError(
        f"no connected layout in {max_attempts} attempts (n={n}, radius={radius}); "
        "increase the radius or the budget"
    )


@dataclass(frozen=True)
class CombinationMatrix:
    """Right-stochastic consensus weights; w[k, l] > 0 only for l in the
    closed neighborhood of k."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
        rows = w.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
            raise ValueError("rows must sum to one")
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def check_support(self, graph: SensorGraph) -> None:
        """Verify that positive weights only sit on closed-neighborhood pairs."""
        allowed = np.eye(graph.n, dtype=bool)
        for a, b in graph.edges:
            allowed[a, b] = allowed[b, a] = True
        if (self.w[~allowed] > 0).any():
            raise ValueError("positive weight outside the closed neighborhood")


def equal_weight_matrix(graph: SensorGraph) -> CombinationMatrix:
    """Uniform weights over each closed neighborhood (self plus neighbors)."""
    w = np.zeros((graph.n, graph.n))
    adj = graph.adjacency()
    for k in range(graph.n):
        nb = adj[k] + [k]
        w[k, nb] = 1.0 / len(nb)
    return CombinationMatrix(w)


@dataclass(frozen=True)
class XiBound:
    """Scalar bound on the diagonal of W^m (W^T)^m used in the statistic
    variance bound; ``method`` records how it was obtained."""

    value: float
    method: str
    power: int

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("xi must be positive")


def xi_bound(w: CombinationMatrix, method: str = "max_norm", power: int = 1) -> XiBound:
    """Compute xi from the mixing matrix.

    max_norm: largest entry of W^m (W^T)^m (cheap, deterministic).
    eigen:    largest eigenvalue of W^m (W^T)^m divided by the node count.
    """
    if power < 1:
        raise ValueError("power must be >= 1")
    wm = np.linalg.matrix_power(w.w, power)
    prod = wm @ wm.T
    if method == "max_norm":
        value = float(prod.max())
    elif method == "eigen":
        value = float(np.linalg.eigvalsh(prod)[-1] / w.n)
    else:
        raise ValueError(f"unknown xi method {method!r}")
    return XiBound(value, method, power)


def graph_to_json(graph: SensorGraph, w: CombinationMatrix | None = None) -> str:
    """Serialize a graph (and optionally its weights) for provenance."""
    doc = {
        "n": graph.n,
        "edges": sorted(list(e) for e in graph.edges),
        "positions": None if graph.positions is None else graph.positions.tolist(),
    }
    if w is not None:
        doc["weights"] = [float(x) for x in w.w.ravel()]
    return json.dumps(doc)


def graph_from_json(text: str) -> tuple[SensorGraph, CombinationMatrix | None]:
    doc = json.loads(text)
    pos = None if doc.get("positions") is None else np.asarray(doc["positions"])
    graph = SensorGraph(doc["n"], frozenset(tuple(e) for e in doc["edges"]), pos)
    w = None
    if doc.get("weights") is not None:
        w = CombinationMatrix(np.asarray(doc["weights"]).reshape(graph.n, graph.n))
    return graph, w
