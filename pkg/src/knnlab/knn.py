"""Exact undirected k-nearest-neighbour graphs.

``build_knn_graph`` uses the grid-indexed kernel (compiled when available);
``brute_force_knn_graph`` is the independent O(n^2) oracle with the identical
tie-break rule (squared distance, then lower vertex index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .geometry import PointSet

BRUTE_FORCE_GUARD = 10_000


@dataclass(frozen=True)
class KnnGraph:
    """Undirected adjacency over vertex indices 0..n-1."""

    k: int
    n: int
    indptr: np.ndarray   # int64, length n+1
    indices: np.ndarray  # int32, sorted within each row
    edges: np.ndarray    # (m, 2) int32 with edges[:, 0] < edges[:, 1]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def edge_cols(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge endpoints as two contiguous arrays."""
        return (np.ascontiguousarray(self.edges[:, 0]),
                np.ascontiguousarray(self.edges[:, 1]))


def _graph_from_pairs(n: int, k: int, rows: np.ndarray, cols: np.ndarray) -> KnnGraph:
    """Symmetrize directed (rows -> cols) pairs into a deduplicated CSR graph."""
    if rows.size == 0:
        return KnnGraph(k=k, n=n,
                        indptr=np.zeros(n + 1, dtype=np.int64),
                        indices=np.empty(0, dtype=np.int32),
                        edges=np.empty((0, 2), dtype=np.int32))
    a = np.concatenate([rows, cols]).astype(np.int64)
    b = np.concatenate([cols, rows]).astype(np.int64)
    code = np.unique(a * n + b)
    r = (code // n).astype(np.int32)
    c = (code % n).astype(np.int32)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    mask = r < c
    edges = np.column_stack([r[mask], c[mask]])
    return KnnGraph(k=k, n=n, indptr=indptr, indices=c, edges=edges)


def _complete_graph(n: int, k: int) -> KnnGraph:
    if n <= 1:
        return _graph_from_pairs(n, k, np.empty(0, np.int32), np.empty(0, np.int32))
    r, c = np.triu_indices(n, 1)
    return _graph_from_pairs(n, k, r.astype(np.int32), c.astype(np.int32))


def build_knn_graph(pointset: PointSet, k: int) -> KnnGraph:
    """Undirected graph joining each point to its k nearest; complete graph
    when fewer than k+2 points exist."""
    if k < 0:
        raise ValueError(f"negative k {k}")
    n = pointset.n
    if k == 0 or n <= 1:
        return _graph_from_pairs(n, k, np.empty(0, np.int32), np.empty(0, np.int32))
    if n <= k + 1:
        return _complete_graph(n, k)
    nbr = _backend.knn_neighbors(pointset.xs, pointset.ys, k)
    rows = np.repeat(np.arange(n, dtype=np.int32), k)
    return _graph_from_pairs(n, k, rows, nbr.ravel())


def directed_neighbors(pointset: PointSet, k: int) -> np.ndarray:
    """(n, k) nearest-neighbour indices, nearest first; shared across a k-sweep
    by slicing columns."""
    return _backend.knn_neighbors(pointset.xs, pointset.ys, k)


def graph_from_neighbors(n: int, nbr: np.ndarray, k: int) -> KnnGraph:
    """Graph for a smaller k from a precomputed (n, k_max) neighbour array."""
    if k == 0 or n <= 1:
        return _graph_from_pairs(n, k, np.empty(0, np.int32), np.empty(0, np.int32))
    if n <= k + 1:
        return _complete_graph(n, k)
    sub = np.ascontiguousarray(nbr[:, :k])
    rows = np.repeat(np.arange(n, dtype=np.int32), k)
    return _graph_from_pairs(n, k, rows, sub.ravel())


def brute_force_knn_graph(pointset: PointSet, k: int) -> KnnGraph:
    """Full pairwise-sort oracle; refuses more than BRUTE_FORCE_GUARD points."""
    if k < 0:
        raise ValueError(f"negative k {k}")
    n = pointset.n
    if n > BRUTE_FORCE_GUARD:
        raise ValueError(f"brute-force oracle refused for {n} > {BRUTE_FORCE_GUARD} points")
    if k == 0 or n <= 1:
        return _graph_from_pairs(n, k, np.empty(0, np.int32), np.empty(0, np.int32))
    if n <= k + 1:
        return _complete_graph(n, k)
    xs, ys = pointset.xs, pointset.ys
    rows_out = []
    block = max(1, int(2e6) // max(n, 1))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = (xs[lo:hi, None] - xs[None, :]) ** 2 + (ys[lo:hi, None] - ys[None, :]) ** 2
        for r in range(hi - lo):
            d2[r, lo + r] = np.inf
        # stable sort on d2 keeps equal distances in index order
        rows_out.append(np.argsort(d2, axis=1, kind="stable")[:, :k])
    nbr = np.vstack(rows_out).astype(np.int32)
    rows = np.repeat(np.arange(n, dtype=np.int32), k)
    return _graph_from_pairs(n, k, rows, nbr.ravel())


def graphs_equal(g1: KnnGraph, g2: KnnGraph) -> bool:
    return (g1.n == g2.n
            and np.array_equal(g1.indptr, g2.indptr)
            and np.array_equal(g1.indices, g2.indices))


def longest_edge_length(graph: KnnGraph, pointset: PointSet) -> float:
    """Maximum Euclidean edge length; 0 for edgeless graphs."""
    if graph.n != pointset.n:
        raise ValueError(f"graph has {graph.n} vertices but pointset has {pointset.n}")
    if graph.edges.shape[0] == 0:
        return 0.0
    dx = pointset.xs[graph.edges[:, 0]] - pointset.xs[graph.edges[:, 1]]
    dy = pointset.ys[graph.edges[:, 0]] - pointset.ys[graph.edges[:, 1]]
    return float(np.sqrt((dx * dx + dy * dy).max()))
