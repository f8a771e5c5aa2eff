"""Communication graphs and doubly stochastic mixing matrices.

Agents are indexed ``0..n-1``. Models are stacked row-wise (one row per
agent), so mixing a stack ``X`` is ``W @ X``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "MixingMatrix",
    "InvalidTopologyError",
    "build_ring",
    "build_complete",
    "metropolis_weights",
    "uniform_complete_weights",
    "build_mixing",
]

EIG_RESIDUAL_TOL = 1e-10
STOCHASTIC_TOL = 1e-12


class InvalidTopologyError(ValueError):
    """Raised for graphs that cannot carry a valid mixing matrix."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph over ``n`` agents.

    ``edges`` holds each unordered pair once as ``(min, max)``.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    neighbor_sets: tuple[tuple[int, ...], ...] = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        if n < 1:
            raise InvalidTopologyError(f"graph needs n >= 1 agents, got {n}")
        canon = set()
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidTopologyError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                continue
            canon.add((min(i, j), max(i, j)))
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for i, j in canon:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return cls(n, frozenset(canon), tuple(tuple(sorted(s)) for s in nbrs))

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.neighbor_sets[i]

    def degree(self, i: int) -> int:
        return len(self.neighbor_sets[i])

    def is_connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.neighbor_sets[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n


@dataclass(frozen=True)
class MixingMatrix:
    """Doubly stochastic weights plus the spectral constants used by the theory.

    ``lambda2`` is the second-largest eigenvalue magnitude of ``weights``;
    ``p = 1 - lambda2**2`` is the per-round contraction constant.
    """

    weights: np.ndarray
    lambda2: float
    graph: Graph | None = None

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def p(self) -> float:
        return 1.0 - self.lambda2**2

    def mix(self, X: np.ndarray) -> np.ndarray:
        return self.weights @ X

    def to_csv(self) -> str:
        rows = [",".join(f"{v:.17g}" for v in row) for row in self.weights]
        return "\n".join(rows) + "\n"


def build_ring(n: int) -> Graph:
    if n < 2:
        raise InvalidTopologyError(f"ring topology requires n >= 2, got {n}")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def build_complete(n: int) -> Graph:
    if n < 1:
        raise InvalidTopologyError(f"complete graph requires n >= 1, got {n}")
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def second_eigen_magnitude(W: np.ndarray) -> float:
    """Second-largest |eigenvalue| of a symmetric doubly stochastic matrix."""
    n = W.shape[0]
    if n == 1:
        return 0.0
    vals, vecs = np.linalg.eigh(W)
    resid = np.linalg.norm(W @ vecs - vecs * vals, axis=0).max()
    if resid > EIG_RESIDUAL_TOL * max(1.0, np.abs(vals).max()):
        raise ArithmeticError(f"eigendecomposition residual {resid:.3e} too large")
    # drop the Perron eigenvalue 1 (eigenvector ~ ones), keep the rest
    ones = np.full(n, 1.0 / np.sqrt(n))
    perron = int(np.argmax(np.abs(vecs.T @ ones)))
    rest = np.delete(vals, perron)
    return float(min(np.abs(rest).max(), 1.0))


def _check_doubly_stochastic(W: np.ndarray) -> None:
    if np.abs(W.sum(axis=1) - 1.0).max() > STOCHASTIC_TOL:
        raise InvalidTopologyError("row sums deviate from 1")
    if np.abs(W.sum(axis=0) - 1.0).max() > STOCHASTIC_TOL:
        raise InvalidTopologyError("column sums deviate from 1")


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights ``w_ij = 1 / (1 + max(deg_i, deg_j))``."""
    if not g.is_connected():
        raise InvalidTopologyError("mixing requires a connected graph")
    n = g.n
    W = np.zeros((n, n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(g.degree(i), g.degree(j)))
        W[i, j] = w
        W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - sum(W[i, j] for j in g.neighbors(i))
    _check_doubly_stochastic(W)
    return MixingMatrix(W, second_eigen_magnitude(W), g)


def uniform_complete_weights(n: int) -> MixingMatrix:
    """Exact averaging matrix ``(1/n) * ones``."""
    if n < 1:
        raise InvalidTopologyError(f"need n >= 1, got {n}")
    W = np.full((n, n), 1.0 / n)
    return MixingMatrix(W, 0.0, build_complete(n))


def build_mixing(kind: str, n: int, weights: str = "metropolis") -> MixingMatrix:
    """Mixing matrix from a ``(kind, n, weights)`` description.

    A ring over a single agent degenerates to the singleton graph.
    """
    if weights == "uniform":
        if kind != "complete":
            raise InvalidTopologyError("uniform weights are only defined on the complete graph")
        return uniform_complete_weights(n)
    if weights != "metropolis":
        raise InvalidTopologyError(f"unknown weight rule {weights!r}")
    if kind == "ring":
        g = build_complete(1) if n == 1 else build_ring(n)
    elif kind == "complete":
        g = build_complete(n)
    else:
        raise InvalidTopologyError(f"unknown topology kind {kind!r}")
    return metropolis_weights(g)
