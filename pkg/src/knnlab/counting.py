"""Grid-indexed counting of small components and the global bad-event battery.

The grid is the set of integer points whose surrounding counting box (side
4*lam*sqrt(log n)) fits inside the sampling square. A small component is
counted at the integer point nearest to its bottom-most vertex; ambiguous
roundings and bottom-most ties feed the bad-event flags instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .components import ComponentSummary, connected_components, find_close_small_pairs
from .geometry import PointSet, rng_from_seed
from .knn import KnnGraph, build_knn_graph, longest_edge_length


class GridPoint(NamedTuple):
    gx: int
    gy: int


def nearest_grid_point(x: float, y: float) -> tuple[GridPoint, bool]:
    """Nearest integer point and a uniqueness flag (False on half-integer
    coordinates, where two integers are equally close)."""
    fx = math.floor(x)
    fy = math.floor(y)
    unique = (x - fx != 0.5) and (y - fy != 0.5)
    return GridPoint(int(math.floor(x + 0.5)), int(math.floor(y + 0.5))), unique


def counting_box_half_side(n: float, lam: float) -> float:
    return 2.0 * lam * math.sqrt(math.log(n))


def gamma_bounds(n: float, lam: float) -> tuple[int, int]:
    """Inclusive integer range [lo, hi] such that the grid is [lo, hi]^2."""
    h = counting_box_half_side(n, lam)
    side = math.sqrt(n)
    lo = math.ceil(h)
    hi = math.floor(side - h)
    return lo, hi


def gamma_size(n: float, lam: float) -> int:
    lo, hi = gamma_bounds(n, lam)
    return 0 if hi < lo else (hi - lo + 1) ** 2


def gamma_points(n: float, lam: float) -> np.ndarray:
    """(m, 2) integer array of all grid points, lexicographically ordered."""
    lo, hi = gamma_bounds(n, lam)
    if hi < lo:
        return np.empty((0, 2), dtype=np.int64)
    vals = np.arange(lo, hi + 1)
    gx, gy = np.meshgrid(vals, vals, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def in_gamma(gp: GridPoint, n: float, lam: float) -> bool:
    lo, hi = gamma_bounds(n, lam)
    return lo <= gp.gx <= hi and lo <= gp.gy <= hi


@dataclass(frozen=True)
class BadEventFlags:
    """The seven global pathologies that break the grid-count correspondence."""

    d1: bool  # some global edge at least lam*sqrt(log n)
    d2: bool  # some sampled local graph has such an edge
    d3: bool  # at least two non-small components
    d4: bool  # small component rounding to a grid point outside the grid range
    d5: bool  # two small components within the close range
    d6: bool  # ambiguous bottom-most vertex or rounding tie, globally
    d7: bool  # same ambiguity inside a sampled local graph

    def any(self) -> bool:
        return self.d1 or self.d2 or self.d3 or self.d4 or self.d5 or self.d6 or self.d7

    def to_dict(self) -> dict:
        return {f"d{i}": bool(getattr(self, f"d{i}")) for i in range(1, 8)}


def _component_rounding(comp: ComponentSummary, pointset: PointSet):
    """Nearest grid point of the bottom-most vertex plus an ambiguity flag
    covering both bottom-most ties and half-integer roundings."""
    vi = comp.vertex_indices
    ys = pointset.ys[vi]
    y_min = ys.min()
    tied = int((ys == y_min).sum()) > 1
    bx = float(pointset.xs[comp.bottom_most_vertex])
    by = float(pointset.ys[comp.bottom_most_vertex])
    gp, unique = nearest_grid_point(bx, by)
    return gp, (tied or not unique)


def local_box_indices(pointset: PointSet, gp: GridPoint, n: float, lam: float) -> np.ndarray:
    """Indices of the points inside the closed counting box around gp."""
    h = counting_box_half_side(n, lam)
    m = ((np.abs(pointset.xs - gp.gx) <= h) & (np.abs(pointset.ys - gp.gy) <= h))
    return np.flatnonzero(m)


@dataclass(frozen=True)
class LocalCellMetrics:
    """Per-grid-cell quantities from the k-NN graph restricted to the cell's
    counting box: the local count indicator, its long-edge event and its
    rounding-ambiguity event."""

    cell: GridPoint
    y_value: int
    has_long_edge: bool
    has_ambiguity: bool


def local_cell_metrics(sub: PointSet, graph_local: KnnGraph,
                       gp: GridPoint, n: float, lam: float) -> LocalCellMetrics:
    """Evaluate the local counting indicator for one cell given the prebuilt
    local graph over the cell's points."""
    small_threshold = lam * math.sqrt(math.log(n))
    long_edge = longest_edge_length(graph_local, sub) >= small_threshold
    comps = connected_components(graph_local, sub, small_threshold)
    y_value = 0
    ambiguous = False
    for comp in comps:
        if not comp.is_small:
            continue
        gp_c, ambiguous_c = _component_rounding(comp, sub)
        if ambiguous_c:
            ambiguous = True
            continue
        if gp_c == gp:
            y_value = 1
    return LocalCellMetrics(cell=gp, y_value=y_value,
                            has_long_edge=bool(long_edge), has_ambiguity=bool(ambiguous))


def evaluate_local_cell(pointset: PointSet, gp: GridPoint, k: int,
                        n: float, lam: float) -> LocalCellMetrics:
    """Build the local graph for one cell from scratch and evaluate it."""
    sub = pointset.take(local_box_indices(pointset, gp, n, lam))
    graph_local = build_knn_graph(sub, k)
    return local_cell_metrics(sub, graph_local, gp, n, lam)


def local_counting_function(pointset: PointSet, gp: GridPoint, k: int,
                            n: float, lam: float) -> int:
    """Indicator that a small local component's bottom-most vertex rounds
    uniquely to gp."""
    return evaluate_local_cell(pointset, gp, k, n, lam).y_value


def global_counting_function(graph: KnnGraph, pointset: PointSet, n: float, lam: float,
                             components: list[ComponentSummary] | None = None,
                             ) -> dict[GridPoint, int]:
    """Sparse 0/1 map over the grid; zero entries are omitted. Ambiguous
    roundings contribute to the bad-event flags, not to the map."""
    small_threshold = lam * math.sqrt(math.log(n))
    if components is None:
        components = connected_components(graph, pointset, small_threshold)
    out: dict[GridPoint, int] = {}
    for comp in components:
        if not comp.is_small:
            continue
        gp, ambiguous = _component_rounding(comp, pointset)
        if ambiguous:
            continue
        if in_gamma(gp, n, lam):
            out[gp] = 1
    return out


DEFAULT_GRID_SAMPLE = 64


def detect_bad_events(graph: KnnGraph, pointset: PointSet, n: float, lam: float,
                      sampled_grid_points: list[GridPoint] | None = None,
                      *,
                      components: list[ComponentSummary] | None = None,
                      cell_metrics: list[LocalCellMetrics] | None = None,
                      k: int | None = None,
                      full_sweep: bool = False) -> BadEventFlags:
    """Evaluate the seven bad events.

    The two local events (d2, d7) are checked over ``sampled_grid_points``;
    precomputed ``cell_metrics`` for those cells are reused when given,
    otherwise the local graphs are built here (``k`` required). With no
    sample given, 64 cells are drawn deterministically; ``full_sweep``
    checks every grid point instead (quadratic in practice).
    """
    if sampled_grid_points is None and cell_metrics is None:
        pts = gamma_points(n, lam)
        if full_sweep or pts.shape[0] <= DEFAULT_GRID_SAMPLE:
            sampled_grid_points = [GridPoint(int(a), int(b)) for a, b in pts]
        else:
            take = rng_from_seed(0).choice(pts.shape[0], size=DEFAULT_GRID_SAMPLE,
                                           replace=False)
            sampled_grid_points = [GridPoint(int(pts[i, 0]), int(pts[i, 1]))
                                   for i in sorted(take)]
    small_threshold = lam * math.sqrt(math.log(n))
    if components is None:
        components = connected_components(graph, pointset, small_threshold)

    d1 = longest_edge_length(graph, pointset) >= small_threshold
    non_small = sum(1 for c in components if not c.is_small)
    d3 = non_small >= 2
    d4 = False
    d6 = False
    for comp in components:
        if not comp.is_small:
            continue
        gp, ambiguous = _component_rounding(comp, pointset)
        if ambiguous:
            d6 = True
        elif not in_gamma(gp, n, lam):
            d4 = True
    d5 = bool(find_close_small_pairs(components, pointset, 8.0 * small_threshold))

    d2 = False
    d7 = False
    if cell_metrics is None and sampled_grid_points:
        if k is None:
            raise ValueError("k is required to build local graphs for d2/d7")
        cell_metrics = [evaluate_local_cell(pointset, gp, k, n, lam)
                        for gp in sampled_grid_points]
    for metric in cell_metrics or []:
        d2 = d2 or metric.has_long_edge
        d7 = d7 or metric.has_ambiguity
    return BadEventFlags(d1=bool(d1), d2=d2, d3=d3, d4=d4, d5=d5, d6=d6, d7=d7)
