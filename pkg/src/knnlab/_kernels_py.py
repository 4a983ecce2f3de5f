"""Pure-Python/numpy fallback for the compiled kernels.

Same contracts as ``_kernels``: exact (distance, index) tie-breaking, identical
outputs. Used when the extension is unavailable or when forced via
``KNN_LAB_BACKEND=py``.
"""

from __future__ import annotations

import math

import numpy as np


def knn_neighbors(xs: np.ndarray, ys: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest points to each point, nearest first.

    Distance ties are broken towards the lower index. Requires 1 <= k <= n-1.
    """
    n = xs.shape[0]
    if k < 1 or n < k + 1:
        raise ValueError("knn_neighbors requires 1 <= k <= n - 1")

    x_min = xs.min()
    y_min = ys.min()
    w = float(xs.max() - x_min)
    h = float(ys.max() - y_min)
    target = max(1.0, (k + 1) / 4.0)
    ncx = ncy = 1
    if w > 0.0 and h > 0.0:
        side = math.sqrt(target * w * h / n)
        ncx = max(1, int(w / side))
        ncy = max(1, int(h / side))
    wx = w / ncx if w > 0.0 else 1.0
    wy = h / ncy if h > 0.0 else 1.0
    s_min = min(wx, wy)

    cx = np.clip(((xs - x_min) / wx).astype(np.int64), 0, ncx - 1)
    cy = np.clip(((ys - y_min) / wy).astype(np.int64), 0, ncy - 1)
    cell = cx * ncy + cy
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=ncx * ncy)
    starts = np.zeros(ncx * ncy + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])

    out = np.empty((n, k), dtype=np.int32)
    for i in range(n):
        ci_x = int(cx[i])
        ci_y = int(cy[i])
        max_ring = max(ci_x, ncx - 1 - ci_x, ci_y, ncy - 1 - ci_y)
        parts: list[np.ndarray] = []
        n_cand = 0
        r = 0
        while True:
            for gx in range(max(ci_x - r, 0), min(ci_x + r, ncx - 1) + 1):
                if gx == ci_x - r or gx == ci_x + r:
                    gy_lo, gy_hi = max(ci_y - r, 0), min(ci_y + r, ncy - 1)
                    for gy in range(gy_lo, gy_hi + 1):
                        c = gx * ncy + gy
                        if starts[c] < starts[c + 1]:
                            parts.append(order[starts[c]:starts[c + 1]])
                            n_cand += starts[c + 1] - starts[c]
                else:
                    for gy in (ci_y - r, ci_y + r):
                        if 0 <= gy <= ncy - 1 and r > 0:
                            c = gx * ncy + gy
                            if starts[c] < starts[c + 1]:
                                parts.append(order[starts[c]:starts[c + 1]])
                                n_cand += starts[c + 1] - starts[c]
            if n_cand > k or r >= max_ring:
                cand = np.concatenate(parts) if parts else np.empty(0, np.int64)
                cand = cand[cand != i]
                if cand.shape[0] >= k:
                    dx = xs[cand] - xs[i]
                    dy = ys[cand] - ys[i]
                    d2 = dx * dx + dy * dy
                    sel = np.lexsort((cand, d2))[:k]
                    bound = r * s_min
                    if d2[sel[k - 1]] < bound * bound or r >= max_ring:
                        out[i] = cand[sel]
                        break
            r += 1
    return out


def component_labels(n: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Connected-component labels from an edge list, numbered by first
    appearance in vertex order."""
    if src.shape[0] != dst.shape[0]:
        raise ValueError("edge arrays must have equal length")
    parent = list(range(n))
    size = [1] * n

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(src.tolist(), dst.tolist()):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]

    labels = np.full(n, -1, dtype=np.int32)
    next_label = 0
    for i in range(n):
        r = find(i)
        if labels[r] == -1:
            labels[r] = next_label
            next_label += 1
        labels[i] = labels[r]
    return labels


def max_pairwise_sq(xs: np.ndarray, ys: np.ndarray, cap_sq: float) -> float:
    """Maximum squared pairwise distance; +inf as soon as any pair exceeds
    cap_sq (strictly)."""
    n = xs.shape[0]
    mx = 0.0
    block = 512
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dx = xs[lo:hi, None] - xs[None, :]
        dy = ys[lo:hi, None] - ys[None, :]
        d2 = dx * dx + dy * dy
        bm = float(d2.max()) if d2.size else 0.0
        if bm > cap_sq:
            return math.inf
        if bm > mx:
            mx = bm
    return mx


def count_within_radii(px, py, qx, qy, r1_sq: float, r2_sq: float):
    """For each query point: counts of data points within the two closed radii."""
    nq = qx.shape[0]
    out1 = np.zeros(nq, dtype=np.int64)
    out2 = np.zeros(nq, dtype=np.int64)
    block = 256
    for lo in range(0, nq, block):
        hi = min(lo + block, nq)
        dx = qx[lo:hi, None] - px[None, :]
        dy = qy[lo:hi, None] - py[None, :]
        d2 = dx * dx + dy * dy
        out1[lo:hi] = (d2 <= r1_sq).sum(axis=1)
        out2[lo:hi] = (d2 <= r2_sq).sum(axis=1)
    return out1, out2
