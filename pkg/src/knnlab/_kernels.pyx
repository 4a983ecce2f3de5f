# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: grid-accelerated k-NN search, union-find labelling,
early-exit pairwise diameter scans and radius counting."""

from libc.math cimport INFINITY, sqrt
from libc.stdlib cimport free, malloc

import numpy as np


def knn_neighbors(const double[::1] xs, const double[::1] ys, Py_ssize_t k):
    """Indices of the k nearest points to each point, nearest first.

    Distance ties are broken towards the lower index. Requires 1 <= k <= n-1.
    """
    cdef Py_ssize_t n = xs.shape[0]
    if k < 1 or n < k + 1:
        raise ValueError("knn_neighbors requires 1 <= k <= n - 1")

    cdef double x_min = xs[0], x_max = xs[0], y_min = ys[0], y_max = ys[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if xs[i] < x_min:
            x_min = xs[i]
        elif xs[i] > x_max:
            x_max = xs[i]
        if ys[i] < y_min:
            y_min = ys[i]
        elif ys[i] > y_max:
            y_max = ys[i]

    # Aim for ~(k+1)/4 points per cell so a few rings resolve a query.
    cdef double target = (k + 1) / 4.0
    if target < 1.0:
        target = 1.0
    cdef double w = x_max - x_min
    cdef double h = y_max - y_min
    cdef Py_ssize_t ncx = 1, ncy = 1
    cdef double side
    if w > 0.0 and h > 0.0:
        side = sqrt(target * w * h / n)
        ncx = <Py_ssize_t>(w / side)
        ncy = <Py_ssize_t>(h / side)
    if ncx < 1:
        ncx = 1
    if ncy < 1:
        ncy = 1
    cdef double wx = w / ncx if w > 0.0 else 1.0
    cdef double wy = h / ncy if h > 0.0 else 1.0
    cdef double s_min = wx if wx < wy else wy
    cdef Py_ssize_t ncells = ncx * ncy

    cdef Py_ssize_t *cell = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *starts = <Py_ssize_t *> malloc((ncells + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *order = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef double *best_d2 = <double *> malloc(k * sizeof(double))
    cdef Py_ssize_t *best_id = <Py_ssize_t *> malloc(k * sizeof(Py_ssize_t))
    if cell == NULL or starts == NULL or order == NULL or best_d2 == NULL or best_id == NULL:
        free(cell); free(starts); free(order); free(best_d2); free(best_id)
        raise MemoryError()

    out = np.empty((n, k), dtype=np.int32)
    cdef int[:, ::1] out_mv = out

    cdef Py_ssize_t cx, cy, c, j, t, m, p, r, max_ring
    cdef Py_ssize_t gx, gy, gx_lo, gx_hi, gy_lo, gy_hi
    cdef double xi, yi, dx, dy, d2, bound
    cdef bint done

    try:
        for c in range(ncells + 1):
            starts[c] = 0
        for i in range(n):
            cx = <Py_ssize_t>((xs[i] - x_min) / wx)
            if cx < 0:
                cx = 0
            elif cx > ncx - 1:
                cx = ncx - 1
            cy = <Py_ssize_t>((ys[i] - y_min) / wy)
            if cy < 0:
                cy = 0
            elif cy > ncy - 1:
                cy = ncy - 1
            cell[i] = cx * ncy + cy
            starts[cell[i] + 1] += 1
        for c in range(ncells):
            starts[c + 1] += starts[c]
        for i in range(n):
            order[starts[cell[i]]] = i
            starts[cell[i]] += 1
        for c in range(ncells, 0, -1):
            starts[c] = starts[c - 1]
        starts[0] = 0

        for i in range(n):
            xi = xs[i]
            yi = ys[i]
            cx = cell[i] / ncy
            cy = cell[i] - cx * ncy
            max_ring = cx
            if ncx - 1 - cx > max_ring:
                max_ring = ncx - 1 - cx
            if cy > max_ring:
                max_ring = cy
            if ncy - 1 - cy > max_ring:
                max_ring = ncy - 1 - cy
            m = 0
            r = 0
            done = False
            while not done:
                # visit the cells on Chebyshev ring r around (cx, cy)
                gx_lo = cx - r
                gx_hi = cx + r
                gy_lo = cy - r
                gy_hi = cy + r
                for gx in range(gx_lo if gx_lo > 0 else 0,
                                (gx_hi if gx_hi < ncx - 1 else ncx - 1) + 1):
                    for gy in range(gy_lo if gy_lo > 0 else 0,
                                    (gy_hi if gy_hi < ncy - 1 else ncy - 1) + 1):
                        if r > 0 and gx != gx_lo and gx != gx_hi and gy != gy_lo and gy != gy_hi:
                            continue
                        c = gx * ncy + gy
                        for t in range(starts[c], starts[c + 1]):
                            j = order[t]
                            if j == i:
                                continue
                            dx = xs[j] - xi
                            dy = ys[j] - yi
                            d2 = dx * dx + dy * dy
                            if m == k:
                                if d2 > best_d2[k - 1] or (d2 == best_d2[k - 1] and j > best_id[k - 1]):
                                    continue
                                p = k - 1
                            else:
                                p = m
                                m += 1
                            while p > 0 and (d2 < best_d2[p - 1] or
                                             (d2 == best_d2[p - 1] and j < best_id[p - 1])):
                                best_d2[p] = best_d2[p - 1]
                                best_id[p] = best_id[p - 1]
                                p -= 1
                            best_d2[p] = d2
                            best_id[p] = j
                if m == k:
                    bound = r * s_min
                    if best_d2[k - 1] < bound * bound:
                        done = True
                if r >= max_ring:
                    done = True
                r += 1
            for p in range(k):
                out_mv[i, p] = <int> best_id[p]
    finally:
        free(cell)
        free(starts)
        free(order)
        free(best_d2)
        free(best_id)
    return out


def component_labels(Py_ssize_t n, const int[::1] src, const int[::1] dst):
    """Connected-component labels from an edge list, numbered by first
    appearance in vertex order."""
    cdef Py_ssize_t m = src.shape[0]
    if dst.shape[0] != m:
        raise ValueError("edge arrays must have equal length")
    out = np.empty(n, dtype=np.int32)
    cdef int[::1] out_mv = out
    cdef Py_ssize_t *parent = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *size = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    if parent == NULL or size == NULL:
        free(parent); free(size)
        raise MemoryError()
    cdef Py_ssize_t i, e, a, b, ra, rb
    cdef int next_label = 0
    try:
        for i in range(n):
            parent[i] = i
            size[i] = 1
        for e in range(m):
            a = src[e]
            b = dst[e]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a == b:
                continue
            if size[a] < size[b]:
                ra = a; a = b; b = ra
            parent[b] = a
            size[a] += size[b]
        # second pass: path-compress fully, then relabel by first appearance
        for i in range(n):
            a = i
            while parent[a] != a:
                a = parent[a]
            b = i
            while parent[b] != a:
                rb = parent[b]
                parent[b] = a
                b = rb
            out_mv[i] = -1
        for i in range(n):
            a = parent[i]
            if out_mv[a] == -1:
                out_mv[a] = next_label
                next_label += 1
            out_mv[i] = out_mv[a]
    finally:
        free(parent)
        free(size)
    return out


def max_pairwise_sq(const double[::1] xs, const double[::1] ys, double cap_sq):
    """Maximum squared pairwise distance; +inf as soon as any pair exceeds
    cap_sq (strictly)."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, j
    cdef double mx = 0.0, dx, dy, d2, xi, yi
    for i in range(n):
        xi = xs[i]
        yi = ys[i]
        for j in range(i + 1, n):
            dx = xs[j] - xi
            dy = ys[j] - yi
            d2 = dx * dx + dy * dy
            if d2 > cap_sq:
                return INFINITY
            if d2 > mx:
                mx = d2
    return mx


def count_within_radii(const double[::1] px, const double[::1] py,
                       const double[::1] qx, const double[::1] qy,
                       double r1_sq, double r2_sq):
    """For each query point: counts of data points within the two closed radii."""
    cdef Py_ssize_t np_ = px.shape[0]
    cdef Py_ssize_t nq = qx.shape[0]
    out1 = np.zeros(nq, dtype=np.int64)
    out2 = np.zeros(nq, dtype=np.int64)
    cdef long long[::1] o1 = out1
    cdef long long[::1] o2 = out2
    cdef Py_ssize_t i, j
    cdef double xi, yi, dx, dy, d2
    for i in range(nq):
        xi = qx[i]
        yi = qy[i]
        for j in range(np_):
            dx = px[j] - xi
            dy = py[j] - yi
            d2 = dx * dx + dy * dy
            if d2 <= r1_sq:
                o1[i] += 1
            if d2 <= r2_sq:
                o2[i] += 1
    return out1, out2
