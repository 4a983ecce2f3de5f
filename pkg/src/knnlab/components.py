"""Connected components, geometric diameters, small/close classification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .geometry import PointSet
from .knn import KnnGraph


@dataclass(frozen=True)
class ComponentSummary:
    """One connected component with its geometric summary.

    ``diameter`` is the max pairwise point distance; it carries the +inf
    sentinel when the scan early-exited past ``small_threshold``.
    """

    component_id: int
    vertex_indices: np.ndarray
    size: int
    diameter: float
    bbox: tuple[float, float, float, float]
    bottom_most_vertex: int
    is_small: bool


def _component_diameter(xs: np.ndarray, ys: np.ndarray, threshold: float) -> float:
    w = float(xs.max() - xs.min())
    h = float(ys.max() - ys.min())
    if max(w, h) > threshold:
        # some pair is at least max(w, h) apart, so the scan would early-exit
        return math.inf
    return math.sqrt(_backend.max_pairwise_sq(
        np.ascontiguousarray(xs), np.ascontiguousarray(ys), threshold * threshold))


def connected_components(graph: KnnGraph, pointset: PointSet,
                         small_threshold: float) -> list[ComponentSummary]:
    """Partition into components; diameters exact below the threshold, +inf
    sentinel beyond it."""
    if graph.n != pointset.n:
        raise ValueError(f"graph has {graph.n} vertices but pointset has {pointset.n}")
    if small_threshold <= 0:
        raise ValueError(f"small_threshold must be positive, got {small_threshold}")
    n = graph.n
    if n == 0:
        return []
    labels = _backend.component_labels(n, *graph.edge_cols())
    order = np.argsort(labels, kind="stable")
    sorted_labels = np.asarray(labels)[order]
    bounds = np.flatnonzero(np.diff(sorted_labels)) + 1
    groups = np.split(order, bounds)
    out = []
    for cid, vi in enumerate(groups):
        vi = np.sort(vi).astype(np.int64)
        xs = pointset.xs[vi]
        ys = pointset.ys[vi]
        if vi.size <= 1:
            diameter = 0.0
        else:
            diameter = _component_diameter(xs, ys, small_threshold)
        bbox = (float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
        bottom = int(vi[np.argmin(ys)])
        out.append(ComponentSummary(
            component_id=cid,
            vertex_indices=vi,
            size=int(vi.size),
            diameter=diameter,
            bbox=bbox,
            bottom_most_vertex=bottom,
            is_small=diameter < small_threshold,
        ))
    return out


def is_connected(graph: KnnGraph) -> bool:
    """True for at most one component; empty and singleton graphs count as
    connected."""
    if graph.n <= 1:
        return True
    labels = _backend.component_labels(graph.n, *graph.edge_cols())
    return int(np.max(labels)) == 0


def _bbox_gap_sq(b1, b2) -> float:
    gx = max(0.0, max(b1[0], b2[0]) - min(b1[2], b2[2]))
    gy = max(0.0, max(b1[1], b2[1]) - min(b1[3], b2[3]))
    return gx * gx + gy * gy


def min_pointset_distance(xs1, ys1, xs2, ys2) -> float:
    d2 = (xs1[:, None] - xs2[None, :]) ** 2 + (ys1[:, None] - ys2[None, :]) ** 2
    return float(np.sqrt(d2.min()))


def find_close_small_pairs(components: list[ComponentSummary], pointset: PointSet,
                           close_threshold: float) -> list[tuple[int, int]]:
    """Unordered pairs of distinct small components containing points at
    distance < close_threshold."""
    if close_threshold <= 0:
        raise ValueError(f"close_threshold must be positive, got {close_threshold}")
    smalls = [c for c in components if c.is_small]
    t2 = close_threshold * close_threshold
    pairs = []
    for a in range(len(smalls)):
        ca = smalls[a]
        xa, ya = pointset.xs[ca.vertex_indices], pointset.ys[ca.vertex_indices]
        for b in range(a + 1, len(smalls)):
            cb = smalls[b]
            if _bbox_gap_sq(ca.bbox, cb.bbox) >= t2:
                continue
            xb, yb = pointset.xs[cb.vertex_indices], pointset.ys[cb.vertex_indices]
            d2 = (xa[:, None] - xb[None, :]) ** 2 + (ya[:, None] - yb[None, :]) ** 2
            if float(d2.min()) < t2:
                pairs.append((ca.component_id, cb.component_id))
    return pairs
