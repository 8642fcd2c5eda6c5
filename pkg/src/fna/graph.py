"""Attention graphs and shortest-path statistics.

Nodes are tokens; a directed edge i -> j exists when query i puts weight
above the threshold on key j. Edge lengths are reciprocal weights, so that
strongly attending tokens sit close together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .attention import StochasticMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttentionGraph:
    weights: np.ndarray
    adjacency: np.ndarray
    theta: float

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    @property
    def lengths(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.adjacency, 1.0 / self.weights, np.inf)

    def edges(self):
        """(src, dst, weight, length) tuples in ascending index order."""
        src, dst = np.nonzero(self.adjacency)
        w = self.weights[src, dst]
        return [(int(i), int(j), float(a), float(1.0 / a)) for i, j, a in zip(src, dst, w)]


@dataclass(frozen=True)
class PathStats:
    """All-pairs hop counts; -1 marks an unreachable ordered pair."""

    hops: np.ndarray
    mean_hops: float
    max_hops: int
    unreachable_pairs: int


def build_graph(A, theta=0.0) -> AttentionGraph:
    """Directed graph with an edge wherever A_ij > theta, i != j."""
    if isinstance(A, StochasticMatrix):
        W, mask = A.weights, A.mask
    else:
        W, mask = np.asarray(A, dtype=float), None
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("attention matrix must be square")
    adj = W > theta
    np.fill_diagonal(adj, False)
    if mask is not None:
        adj &= np.asarray(mask, dtype=bool)[None, :]
    g = AttentionGraph(W, adj, float(theta))
    if g.n > 1 and g.n_edges == 0:
        log.warning("threshold %g leaves the attention graph without edges", theta)
    return g


def _stats(hops_f) -> PathStats:
    n = hops_f.shape[0]
    off = ~np.eye(n, dtype=bool)
    reach = np.isfinite(hops_f) & off
    unreachable = int((off & ~np.isfinite(hops_f)).sum())
    hops = np.where(np.isfinite(hops_f), hops_f, -1).astype(np.int64)
    if reach.any():
        mean, mx = float(hops_f[reach].mean()), int(hops_f[reach].max())
    else:
        mean, mx = 0.0, 0
    return PathStats(hops, mean, mx, unreachable)


def shortest_hops(G: AttentionGraph) -> PathStats:
    """Breadth-first hop counts between every ordered pair of tokens."""
    dist = shortest_path(csr_matrix(G.adjacency.astype(float)), method="D", unweighted=True)
    return _stats(dist)


def weighted_paths(G: AttentionGraph):
    """Dijkstra on reciprocal-weight lengths.

    Returns ``(lengths, hops)`` where ``hops`` counts the edges along each
    minimum-length path (-1 when unreachable).
    """
    lengths = np.where(G.adjacency, G.lengths, 0.0)
    dist, pred = shortest_path(csr_matrix(lengths), method="D", return_predecessors=True)
    n = G.n
    hops = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        hops[s, s] = 0
        for t in range(n):
            if t == s or not np.isfinite(dist[s, t]):
                continue
            k, node = 0, t
            while node != s:
                node = pred[s, node]
                k += 1
            hops[s, t] = k
    return dist, hops


def path_stats_from_hops(hops) -> PathStats:
    hops = np.asarray(hops)
    return _stats(np.where(hops < 0, np.inf, hops).astype(float))
