"""Local-box machinery: derived constants, tilings, local events, the
empty-tile certificate, claim-geometry checks and bulk-square covers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .geometry import (PointSet, Region, derive_trial_seed, rng_from_seed,
                       sample_poisson_pointset)
from .knn import KnnGraph, build_knn_graph
from .stats import log_poisson_tail_below, log_poisson_tail_upper

E2 = math.e ** 2
SQRT5 = math.sqrt(5.0)

# closed-form radii behind the local concentration event
LAMBDA2_PRIME = 2.0 * math.sqrt(math.e ** 3 / math.pi)
LAMBDA1_PRIME = math.sqrt(math.exp(-49.0 / 3.0) / math.pi)
PAPER_LAMBDA2 = LAMBDA2_PRIME + 1.0
PAPER_LAMBDA1 = LAMBDA1_PRIME / 2.0


class ConsistencyError(RuntimeError):
    """A derived-constant guard failed after construction."""


@dataclass(frozen=True)
class ConstantsBundle:
    """All derived constants for a given n, either paper-faithful or scaled."""

    lam: float
    M: float
    lam1: float
    lam2: float
    N1: int
    N2: int
    N3: int
    N: int
    c3: float
    c4: float
    n: float
    scaled: bool = False

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def sqrt_log_n(self) -> float:
        return math.sqrt(math.log(self.n))

    @property
    def u_side(self) -> float:
        return self.M * self.sqrt_log_n

    @property
    def tile_side(self) -> float:
        return self.sqrt_log_n / self.N

    def u_region(self) -> Region:
        return Region.centered_square(self.u_side)

    def to_dict(self) -> dict:
        return {
            "lam": self.lam, "M": self.M, "lam1": self.lam1, "lam2": self.lam2,
            "N1": self.N1, "N2": self.N2, "N3": self.N3, "N": self.N,
            "c3": self.c3, "c4": self.c4, "n": self.n, "scaled": self.scaled,
        }


def _enclosure_counts(lam1: float, lam2: float) -> tuple[int, int, int]:
    n1 = math.ceil(SQRT5 / lam1) + 1
    n2 = math.ceil(2.0 / lam1 + 4.0 * SQRT5 * lam2 / lam1 ** 2)
    root = math.sqrt(((1 + SQRT5) * lam1 + lam2) ** 2 - (5 + 2 * SQRT5) * lam1 ** 2)
    n3 = math.ceil(((1 + SQRT5) * lam1 + lam2 + root) / lam1 ** 2) + 1
    return n1, n2, n3


def guard_inequalities(lam1: float, lam2: float, n_tiles: int) -> tuple[bool, bool]:
    """The two tiling guards the geometric claims rely on."""
    g1 = 1.0 / n_tiles + math.sqrt(4.0 * SQRT5 * lam2 / n_tiles + 1.0 / n_tiles ** 2) <= lam1
    g2 = 1.0 / n_tiles ** 2 + 2.0 * lam2 / n_tiles < (lam1 - (1 + SQRT5) / n_tiles) ** 2
    return g1, g2


def verify_guards(bundle: ConstantsBundle) -> None:
    g1, g2 = guard_inequalities(bundle.lam1, bundle.lam2, bundle.N)
    if not g1:
        raise ConsistencyError("first tiling guard failed")
    if not g2:
        raise ConsistencyError("second tiling guard failed")
    if bundle.lam1 <= (1 + SQRT5) / bundle.N:
        raise ConsistencyError("lam1 too small for the tile diagonal bound")
    if bundle.lam2 > bundle.lam:
        raise ConsistencyError("lam2 exceeds lam")
    if bundle.lam1 >= bundle.lam2:
        raise ConsistencyError("lam1 must be below lam2")
    if bundle.lam2 >= bundle.M / 4.0:
        raise ConsistencyError("lam2 must be below M/4 for boundary-tile isolation")
    count = bundle.M * bundle.N
    if abs(count - round(count)) > 1e-9:
        raise ConsistencyError("M*N must be integral for a perfect tiling")


def compute_constants(lam: float, n: float) -> ConstantsBundle:
    """Paper-faithful constants for the local box at a given lam >= e^2."""
    if lam < E2 * (1.0 - 1e-6):  # tolerate decimal truncations of e^2
        raise ValueError(f"lam must be at least e^2 ~ {E2:.6f}, got {lam}")
    if n <= 1:
        raise ValueError(f"n must exceed 1, got {n}")
    lam1 = PAPER_LAMBDA1
    lam2 = PAPER_LAMBDA2
    n1, n2, n3 = _enclosure_counts(lam1, lam2)
    big_n = max(n1, n2, n3)
    m = max(160.0 * math.ceil(lam), 50.0)
    bundle = ConstantsBundle(
        lam=float(lam), M=m, lam1=lam1, lam2=lam2,
        N1=n1, N2=n2, N3=n3, N=big_n,
        c3=(m * big_n) ** 2, c4=1.0 / big_n ** 2, n=float(n), scaled=False,
    )
    verify_guards(bundle)
    return bundle


def _solve_scaled_pair(m: float, n_tiles: int, lam: float) -> tuple[float, float]:
    """A (lam1, lam2) pair satisfying every guard for the given tile count,
    found by shrinking lam2 from its ceiling until a gap opens for lam1."""
    cap = 0.96 * min(lam, m / 4.0)
    lam2 = cap
    for _ in range(200):
        lo = 1.0 / n_tiles + math.sqrt(4.0 * SQRT5 * lam2 / n_tiles + 1.0 / n_tiles ** 2)
        lo2 = (1 + SQRT5) / n_tiles + math.sqrt(1.0 / n_tiles ** 2 + 2.0 * lam2 / n_tiles)
        floor = max(lo, lo2)
        if floor < lam2:
            lam1 = math.sqrt(floor * lam2)
            g1, g2 = guard_inequalities(lam1, lam2, n_tiles)
            if g1 and g2:
                return lam1, lam2
        lam2 *= 0.9
    raise ConsistencyError(
        f"no consistent (lam1, lam2) pair exists for M={m}, N={n_tiles}")


def scaled_constants(n: float, lam: float = E2, M: float = 10.0, N: int | None = 8,
                     lam1: float | None = None, lam2: float | None = None,
                     ) -> ConstantsBundle:
    """Desk-scale constants with user-set box and tile counts.

    The paper radii fail the tiling guards at small N, so a consistent
    (lam1, lam2) pair is re-solved for the requested N unless given
    explicitly. With N=None the tile count is derived from the pair via the
    same enclosure formulas as the paper-faithful mode.
    """
    if n <= 1:
        raise ValueError(f"n must exceed 1, got {n}")
    if lam1 is None or lam2 is None:
        if N is None:
            raise ValueError("either N or an explicit (lam1, lam2) pair is required")
        lam1, lam2 = _solve_scaled_pair(M, N, lam)
    n1, n2, n3 = _enclosure_counts(lam1, lam2)
    big_n = max(n1, n2, n3) if N is None else int(N)
    bundle = ConstantsBundle(
        lam=float(lam), M=float(M), lam1=float(lam1), lam2=float(lam2),
        N1=n1, N2=n2, N3=n3, N=big_n,
        c3=(M * big_n) ** 2, c4=1.0 / big_n ** 2, n=float(n), scaled=True,
    )
    verify_guards(bundle)
    return bundle


@dataclass(frozen=True)
class Tiling:
    """Perfect tiling of the local box into (M*N)^2 square tiles."""

    tile_side: float
    tiles_per_side: int
    origin: float  # lower-left corner of the box, both coordinates

    @staticmethod
    def for_bundle(bundle: ConstantsBundle) -> "Tiling":
        count = int(round(bundle.M * bundle.N))
        return Tiling(tile_side=bundle.u_side / count, tiles_per_side=count,
                      origin=-bundle.u_side / 2.0)

    def tile_region(self, ix: int, iy: int) -> Region:
        x0 = self.origin + ix * self.tile_side
        y0 = self.origin + iy * self.tile_side
        return Region(x0, y0, x0 + self.tile_side, y0 + self.tile_side)

    def tile_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int((x - self.origin) / self.tile_side)
        iy = int((y - self.origin) / self.tile_side)
        last = self.tiles_per_side - 1
        return min(max(ix, 0), last), min(max(iy, 0), last)

    def column_indices(self, xs: np.ndarray, ix: int) -> np.ndarray:
        """Row indices of points falling in tile column ix."""
        col = np.floor((xs - self.origin) / self.tile_side).astype(np.int64)
        np.clip(col, 0, self.tiles_per_side - 1, out=col)
        return np.flatnonzero(col == ix)

    def row_of(self, ys: np.ndarray) -> np.ndarray:
        row = np.floor((ys - self.origin) / self.tile_side).astype(np.int64)
        np.clip(row, 0, self.tiles_per_side - 1, out=row)
        return row


@dataclass(frozen=True)
class LocalEventOutcome:
    a_k: bool
    b_k: bool
    components_in_half_box: int
    bad_C: bool

    def to_dict(self) -> dict:
        return {"a_k": self.a_k, "b_k": self.b_k,
                "components_in_half_box": self.components_in_half_box,
                "bad_C": self.bad_C}


def components_inside_half_box(graph: KnnGraph, pointset: PointSet,
                               bundle: ConstantsBundle) -> list[np.ndarray]:
    """Vertex-index arrays of the components wholly inside the central
    subsquare (closed boundary)."""
    n = pointset.n
    if n == 0:
        return []
    labels = _backend.component_labels(n, *graph.edge_cols())
    half = bundle.u_side / 4.0
    inside = (np.abs(pointset.xs) <= half) & (np.abs(pointset.ys) <= half)
    out = []
    for lab in range(int(labels.max()) + 1):
        vi = np.flatnonzero(labels == lab)
        if inside[vi].all():
            out.append(vi)
    return out


def detect_bad_set_C(pointset: PointSet, k: int, bundle: ConstantsBundle) -> bool:
    """True when some integer grid point of the box has at least k points
    within lam1*sqrt(log n) or fewer than k within lam2*sqrt(log n).

    Grid-point detection is the operational surrogate for the paper's
    any-point event; off-grid centres differ by at most the sqrt(2) grid slack.
    """
    half = bundle.u_side / 2.0
    lo = math.ceil(-half)
    hi = math.floor(half)
    vals = np.arange(lo, hi + 1, dtype=np.float64)
    gx, gy = np.meshgrid(vals, vals, indexing="ij")
    qx = np.ascontiguousarray(gx.ravel())
    qy = np.ascontiguousarray(gy.ravel())
    r1 = bundle.lam1 * bundle.sqrt_log_n
    r2 = bundle.lam2 * bundle.sqrt_log_n
    c1, c2 = _backend.count_within_radii(pointset.xs, pointset.ys, qx, qy,
                                         r1 * r1, r2 * r2)
    return bool((c1 >= k).any() or (c2 < k).any())


def evaluate_local_events(pointset: PointSet, k: int, bundle: ConstantsBundle,
                          graph: KnnGraph | None = None) -> LocalEventOutcome:
    """Local component events over the box, plus the concentration bad set."""
    if not pointset.region.close_to(bundle.u_region()):
        raise ValueError("pointset region is not the local box for these constants")
    if graph is None:
        graph = build_knn_graph(pointset, k)
    inside = components_inside_half_box(graph, pointset, bundle)
    count = len(inside)
    return LocalEventOutcome(
        a_k=count >= 1, b_k=count >= 2,
        components_in_half_box=count,
        bad_C=detect_bad_set_C(pointset, k, bundle),
    )


def mechanism_premises_hold(pointset: PointSet, nbr: np.ndarray, k: int,
                            bundle: ConstantsBundle) -> bool:
    """Vertex-level consequences of a clean concentration event, checked
    exactly on the sample: no non-adjacent vertex pair within
    lam1*sqrt(log n), and every vertex's k-th neighbour within
    lam2*sqrt(log n)."""
    xs, ys = pointset.xs, pointset.ys
    r1 = bundle.lam1 * bundle.sqrt_log_n
    r2 = bundle.lam2 * bundle.sqrt_log_n
    kth = nbr[:, k - 1]
    d2k = (xs - xs[kth]) ** 2 + (ys - ys[kth]) ** 2
    if (d2k > r2 * r2).any():
        return False
    # candidate close pairs via coarse binning at the r1 scale
    cx = np.floor(xs / r1).astype(np.int64)
    cy = np.floor(ys / r1).astype(np.int64)
    cells: dict[tuple[int, int], list[int]] = {}
    for i, key in enumerate(zip(cx.tolist(), cy.tolist())):
        cells.setdefault(key, []).append(i)
    nbr_sets = [set(row[:k].tolist()) for row in nbr]
    r1_sq = r1 * r1
    for (ax, ay), occupants in cells.items():
        for dx_ in (-1, 0, 1):
            for dy_ in (-1, 0, 1):
                other = cells.get((ax + dx_, ay + dy_))
                if not other:
                    continue
                for i in occupants:
                    for j in other:
                        if j <= i:
                            continue
                        d2 = (xs[i] - xs[j]) ** 2 + (ys[i] - ys[j]) ** 2
                        if d2 <= r1_sq and j not in nbr_sets[i] and i not in nbr_sets[j]:
                            return False
    return True


@dataclass(frozen=True)
class EmptyTileCertificate:
    """Replay of the proof construction on one conditioned pointset."""

    found: bool
    tile_ix: int
    tile_iy: int
    boundary_case: bool
    batches_tested: int
    failures: int
    counterexample: str | None

    @property
    def passed(self) -> bool:
        return self.found and self.failures == 0


def _random_batch(rng: np.random.Generator, tile: Region) -> tuple[np.ndarray, np.ndarray]:
    size = int(rng.integers(1, 51))
    bx = rng.uniform(tile.x_min, tile.x_max, size)
    by = rng.uniform(tile.y_min, tile.y_max, size)
    return bx, by


def empty_tile_certificate(pointset: PointSet, k: int, bundle: ConstantsBundle,
                           batch_count: int = 50, seed: int = 0,
                           graph: KnnGraph | None = None) -> EmptyTileCertificate:
    """Locate the designated empty tile below the witness components and
    verify that sampled point batches inserted there never destroy the
    single-isolated-component event.

    The insertion check samples finitely many batches (corners and centroid
    first), so it falsifies rather than proves the for-all property.
    """
    if graph is None:
        graph = build_knn_graph(pointset, k)
    outcome = evaluate_local_events(pointset, k, bundle, graph=graph)
    if not outcome.b_k or outcome.bad_C:
        raise ValueError("certificate requires the two-component event without the bad set")

    tiling = Tiling.for_bundle(bundle)
    inside = components_inside_half_box(graph, pointset, bundle)
    witness = np.concatenate(inside)
    ys_w = pointset.ys[witness]
    a_idx = int(witness[np.argmin(ys_w)])
    ax_, ay_ = float(pointset.xs[a_idx]), float(pointset.ys[a_idx])
    ix, iy = tiling.tile_of(ax_, ay_)

    col = tiling.column_indices(pointset.xs, ix)
    rows = tiling.row_of(pointset.ys[col])
    below = rows[rows < iy]
    if below.size == 0:
        q_ix, q_iy = ix, 0
        boundary = True
    else:
        top_occupied = int(below.max())
        if top_occupied == iy - 1:
            return EmptyTileCertificate(
                found=False, tile_ix=ix, tile_iy=-1, boundary_case=False,
                batches_tested=0, failures=0,
                counterexample="tile directly below the bottom-most witness vertex is occupied",
            )
        q_ix, q_iy = ix, top_occupied + 1
        boundary = False

    tile = tiling.tile_region(q_ix, q_iy)
    rng = rng_from_seed(seed)
    cx = (tile.x_min + tile.x_max) / 2.0
    cy = (tile.y_min + tile.y_max) / 2.0
    batches = [
        (np.array([cx]), np.array([cy])),
        (np.array([tile.x_min, tile.x_min, tile.x_max, tile.x_max]),
         np.array([tile.y_min, tile.y_max, tile.y_min, tile.y_max])),
    ]
    while len(batches) < batch_count:
        batches.append(_random_batch(rng, tile))

    failures = 0
    for bx, by in batches:
        xs2 = np.concatenate([pointset.xs, bx])
        ys2 = np.concatenate([pointset.ys, by])
        merged = PointSet(xs=xs2, ys=ys2, region=pointset.region,
                          seed=pointset.seed, intensity=pointset.intensity)
        graph2 = build_knn_graph(merged, k)
        if not components_inside_half_box(graph2, merged, bundle):
            failures += 1
    return EmptyTileCertificate(
        found=True, tile_ix=q_ix, tile_iy=q_iy, boundary_case=boundary,
        batches_tested=len(batches), failures=failures, counterexample=None,
    )


def two_cluster_fixture(bundle: ConstantsBundle, k: int, seed: int,
                        column_point_depth: float | None = None) -> PointSet:
    """Deterministic pointset witnessing the two-isolated-components event
    with a clean concentration profile.

    A jittered unit-density grid fills the box except for protective moats
    around two tight (k+1)-point clusters placed inside the central
    subsquare. With ``column_point_depth`` set, an extra background point is
    dropped straight below the bottom witness vertex so the certificate
    exercises its occupied-column branch.
    """
    rng = rng_from_seed(seed)
    u = bundle.u_side
    half = u / 2.0
    spacing = 0.95
    jitter = 0.22
    moat = 2.75
    cluster_r = 0.22

    centers = [(-0.12 * u, 0.08 * u), (0.10 * u, -0.11 * u)]
    pts_x = []
    pts_y = []
    for cx, cy in centers:
        for j in range(k + 1):
            ang = 2.0 * math.pi * j / (k + 1) + 0.3
            pts_x.append(cx + cluster_r * math.cos(ang))
            pts_y.append(cy + cluster_r * math.sin(ang))
    grid_vals = np.arange(-half + spacing / 2.0, half, spacing)
    gx, gy = np.meshgrid(grid_vals, grid_vals, indexing="ij")
    bx = gx.ravel() + rng.uniform(-jitter, jitter, gx.size)
    by = gy.ravel() + rng.uniform(-jitter, jitter, gy.size)
    np.clip(bx, -half, half, out=bx)
    np.clip(by, -half, half, out=by)
    keep = np.ones(bx.size, dtype=bool)
    for cx, cy in centers:
        keep &= (bx - cx) ** 2 + (by - cy) ** 2 > moat * moat
    bx = bx[keep]
    by = by[keep]

    if column_point_depth is not None:
        wy = np.array(pts_y)
        low = int(np.argmin(wy))
        col_x = pts_x[low]
        col_y = pts_y[low] - column_point_depth
        bx = np.append(bx, col_x)
        by = np.append(by, col_y)

    xs = np.concatenate([np.array(pts_x), bx])
    ys = np.concatenate([np.array(pts_y), by])
    ps = PointSet(xs=xs, ys=ys, region=bundle.u_region(), seed=int(seed), intensity=1.0)

    graph = build_knn_graph(ps, k)
    outcome = evaluate_local_events(ps, k, bundle, graph=graph)
    if not outcome.b_k or outcome.bad_C:
        raise ConsistencyError(
            f"fixture construction failed for seed {seed}: {outcome}")
    return ps


def sample_conditioned_local(bundle: ConstantsBundle, k: int, base_seed: int,
                             count: int, max_attempts: int = 500_000,
                             require_premises: bool = True):
    """Poisson samples of the box conditioned on the two-isolated-components
    event with a clean concentration profile, by rejection.

    With ``require_premises`` the vertex-level consequences of the clean
    profile are enforced too, closing the sqrt(2) grid-detection slack, so
    the certificate construction is covered by the deterministic geometry.
    Yields (pointset, graph) pairs.
    """
    produced = 0
    for attempt in range(max_attempts):
        if produced >= count:
            return
        ps = sample_poisson_pointset(bundle.u_region(), 1.0,
                                     derive_trial_seed(base_seed, attempt))
        if ps.n <= k + 1:
            continue
        graph = build_knn_graph(ps, k)
        if len(components_inside_half_box(graph, ps, bundle)) < 2:
            continue
        if detect_bad_set_C(ps, k, bundle):
            continue
        if require_premises:
            nbr = _backend.knn_neighbors(ps.xs, ps.ys, k)
            if not mechanism_premises_hold(ps, nbr, k, bundle):
                continue
        produced += 1
        yield ps, graph
    if produced < count:
        raise RuntimeError(
            f"conditioned sampler produced {produced}/{count} in {max_attempts} attempts")


@dataclass(frozen=True)
class ClaimCheckReport:
    claim1_samples: int
    claim1_counterexamples: int
    claim2_samples: int
    claim2_counterexamples: int

    @property
    def passed(self) -> bool:
        return self.claim1_counterexamples == 0 and self.claim2_counterexamples == 0


def check_claim_inequalities(sample_count: int, seed: int,
                             bundle: ConstantsBundle) -> ClaimCheckReport:
    """Sample premise-satisfying point configurations for the two geometric
    claims and count conclusion violations.

    Geometry is normalized so the bottom-most witness vertex sits at the
    origin with the separating horizontal line as the x-axis; premise-violating
    draws are resampled, not counted.
    """
    rng = rng_from_seed(seed)
    s = bundle.sqrt_log_n
    ts = bundle.tile_side
    lam1_s = bundle.lam1 * s
    lam2_s = bundle.lam2 * s

    def _cap_points(bx, by, radius):
        """Uniform points in the part of disc(b, radius) strictly above the
        x-axis (the caps can be slivers, so sample them directly)."""
        n_draw = bx.shape[0]
        w = np.sqrt(np.maximum(radius * radius - by * by, 0.0))
        dx = np.empty(n_draw)
        dy = np.empty(n_draw)
        todo = np.arange(n_draw)
        for _ in range(200):
            qx = bx[todo] + rng.uniform(-1.0, 1.0, todo.size) * w[todo]
            qy = rng.uniform(0.0, 1.0, todo.size) * (by[todo] + radius[todo])
            ok = ((qx - bx[todo]) ** 2 + (qy - by[todo]) ** 2 <= radius[todo] ** 2) & (qy > 0.0)
            dx[todo[ok]] = qx[ok]
            dy[todo[ok]] = qy[ok]
            todo = todo[~ok]
            if todo.size == 0:
                break
        if todo.size:
            # cap degenerate to measure zero; place at the apex
            dx[todo] = bx[todo]
            dy[todo] = by[todo] + radius[todo]
        return dx, dy

    # Claim 1: a neighbour above the line of an inserted tile point stays
    # within the short radius of the witness vertex.
    done = 0
    bad1 = 0
    while done < sample_count:
        n_draw = min(200_000, sample_count - done)
        bx = rng.uniform(-ts, ts, n_draw)
        by = rng.uniform(-(lam2_s + SQRT5 * ts), 0.0, n_draw)
        ab = np.hypot(bx, by)
        r_lo = np.maximum(0.0, -by - SQRT5 * ts)
        r_hi = np.minimum(lam2_s, ab + SQRT5 * ts)
        r_val = r_lo + rng.uniform(0.0, 1.0, n_draw) * np.maximum(r_hi - r_lo, 0.0)
        dx, dy = _cap_points(bx, by, r_val + SQRT5 * ts)
        ad = np.hypot(dx, dy)
        bad1 += int((ad > lam1_s).sum())
        done += n_draw

    # Claim 2: such a neighbour is closer to the witness vertex than to the
    # inserted point.
    done = 0
    bad2 = 0
    while done < sample_count:
        n_draw = min(200_000, 2 * (sample_count - done) + 100)
        bx = rng.uniform(-ts, ts, n_draw)
        by = rng.uniform(-0.999 * lam2_s, 0.0, n_draw)
        theta = rng.uniform(0.0, 2.0 * math.pi, n_draw)
        rho = np.sqrt(rng.uniform(0.0, 1.0, n_draw)) * SQRT5 * ts
        cx = bx + rho * np.cos(theta)
        cy = by + rho * np.sin(theta)
        keep = np.hypot(cx, cy) >= lam1_s
        if not keep.any():
            continue
        bx, by = bx[keep], by[keep]
        dx, dy = _cap_points(bx, by, np.full(bx.shape, lam2_s))
        ad = np.hypot(dx, dy)
        bd = np.hypot(dx - bx, dy - by)
        take = min(bx.size, sample_count - done)
        bad2 += int((ad[:take] >= bd[:take]).sum())
        done += take

    return ClaimCheckReport(
        claim1_samples=sample_count, claim1_counterexamples=bad1,
        claim2_samples=sample_count, claim2_counterexamples=bad2,
    )


@dataclass(frozen=True)
class CoverPair:
    bulk: Region
    independent: list[Region]
    dominating: list[Region]

    @property
    def per_side(self) -> int:
        return int(round(math.sqrt(len(self.independent))))


def minimal_cover_n(m: float) -> float:
    """Smallest n with sqrt(n) >= 3*M*sqrt(log n), found by fixed-point
    iteration."""
    n = max(10.0, 9.0 * m * m)
    for _ in range(200):
        n_next = 9.0 * m * m * math.log(n)
        if abs(n_next - n) < 1e-9 * n:
            return n_next
        n = n_next
    return n


def build_covers(n: float, bundle: ConstantsBundle) -> CoverPair:
    """The bulk square away from the boundary, tiled by disjoint box copies,
    plus the 25-translate dominating cover."""
    ms = bundle.M * math.sqrt(math.log(n))
    side = math.sqrt(n)
    f = math.floor(side / ms)
    if f < 3:
        raise ValueError(
            f"bulk square empty at n={n:g}; minimal feasible n is about "
            f"{minimal_cover_n(bundle.M):.6g}")
    bulk = Region(ms, ms, (f - 1) * ms, (f - 1) * ms)
    per_side = f - 2
    independent = []
    for i in range(per_side):
        for j in range(per_side):
            x0 = ms + i * ms
            y0 = ms + j * ms
            independent.append(Region(x0, y0, x0 + ms, y0 + ms))
    dominating = []
    for v in independent:
        for di in (-2, -1, 0, 1, 2):
            for dj in (-2, -1, 0, 1, 2):
                dominating.append(Region(
                    v.x_min + di * ms / 4.0, v.y_min + dj * ms / 4.0,
                    v.x_max + di * ms / 4.0, v.y_max + dj * ms / 4.0))
    if len(dominating) != 25 * len(independent):
        raise ConsistencyError("dominating cover must have 25 translates per copy")
    if not len(dominating) < 25.0 * n / (bundle.M ** 2 * math.log(n)):
        raise ConsistencyError("dominating cover exceeds its size bound")
    return CoverPair(bulk=bulk, independent=independent, dominating=dominating)


def lemma_tail_chain_low(n: float) -> list[float]:
    """Log-scale ladder of the displayed bounds for the too-few-points tail:
    exact tail, term bound, simplified exponent, clean exponent, final cap."""
    big_l = math.log(n)
    mean = math.pi * LAMBDA2_PRIME ** 2 / 4.0 * big_l  # equals e^3 * log n
    t = 0.6 * big_l
    log_exact = log_poisson_tail_below(mean, math.ceil(t) - 1)
    log_e1 = math.log(t) - mean + t * math.log(mean) - math.lgamma(t + 1.0)
    log_e2 = math.log(t) - mean + t * math.log(math.e * math.pi * LAMBDA2_PRIME ** 2 / 2.4)
    log_e3 = math.log(t) - (math.e ** 3 - 3.0) * big_l
    log_e4 = math.log(t) - 4.0 * big_l
    return [log_exact, log_e1, log_e2, log_e3, log_e4]


def lemma_tail_chain_high(n: float) -> list[float]:
    """Log-scale ladder for the too-many-points tail: exact tail, geometric
    series bound, Stirling bound, clean exponent, final cap."""
    big_l = math.log(n)
    mean = math.pi * LAMBDA1_PRIME ** 2 * big_l  # equals e^{-49/3} * log n
    t = 0.3 * big_l
    j0 = math.ceil(t)
    q = math.pi * LAMBDA1_PRIME ** 2 / 0.3
    log_exact = log_poisson_tail_upper(mean, j0)
    log_e1 = t * math.log(mean) - math.lgamma(j0 + 1.0) - mean - math.log1p(-q)
    log_e2 = t * (math.log(mean) - math.log(t / math.e) - q) - math.log1p(-q)
    log_e3 = t * (-49.0 / 3.0 + math.log(math.e / 0.3)) - math.log1p(-q)
    log_cap = -4.0 * big_l
    return [log_exact, log_e1, log_e2, log_e3, log_cap]
