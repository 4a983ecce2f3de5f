"""Both kernel backends against brute-force oracles."""

import numpy as np
import pytest

from knnlab import _kernels_py

BACKENDS = [_kernels_py]
try:
    from knnlab import _kernels
    BACKENDS.append(_kernels)
except ImportError:
    pass


def brute_neighbors(xs, ys, k):
    d2 = (xs[:, None] - xs) ** 2 + (ys[:, None] - ys) ** 2
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k].astype(np.int32)


def bfs_labels(n, src, dst):
    adj = [[] for _ in range(n)]
    for s, d in zip(src, dst):
        adj[s].append(d)
        adj[d].append(s)
    lab = np.full(n, -1, dtype=np.int32)
    nxt = 0
    for i in range(n):
        if lab[i] != -1:
            continue
        stack = [i]
        lab[i] = nxt
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if lab[v] == -1:
                    lab[v] = nxt
                    stack.append(v)
        nxt += 1
    return lab


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_knn_matches_brute_oracle(impl):
    rng = np.random.default_rng(42)
    for trial in range(40):
        n = int(rng.integers(3, 500))
        k = int(rng.integers(1, min(n - 1, 15) + 1))
        xs = rng.uniform(0, 40, n)
        ys = rng.uniform(0, 40, n)
        if trial % 4 == 0 and n > 8:
            xs[3] = xs[1]
            ys[3] = ys[1]  # exact duplicate: distance-0 tie
        assert np.array_equal(impl.knn_neighbors(xs, ys, k), brute_neighbors(xs, ys, k))


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_knn_collinear_and_ties(impl):
    xs = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    ys = np.zeros(6)
    out = impl.knn_neighbors(xs, ys, 2)
    # vertex 1: points 0 and 2 both at distance 1; both selected
    assert set(out[1]) == {0, 2}
    # vertex 2: ties at distance 1 broken towards the lower index first
    assert out[2].tolist() == [1, 3]


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_knn_rejects_bad_k(impl):
    xs = np.array([0.0, 1.0])
    ys = np.array([0.0, 0.0])
    with pytest.raises(ValueError):
        impl.knn_neighbors(xs, ys, 2)
    with pytest.raises(ValueError):
        impl.knn_neighbors(xs, ys, 0)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_component_labels_match_bfs(impl):
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(1, 300))
        m = int(rng.integers(0, 2 * n))
        src = rng.integers(0, n, m).astype(np.int32)
        dst = rng.integers(0, n, m).astype(np.int32)
        assert np.array_equal(impl.component_labels(n, src, dst), bfs_labels(n, src, dst))


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_max_pairwise_sq(impl):
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(0, 200))
        xs = rng.uniform(0, 5, n)
        ys = rng.uniform(0, 5, n)
        exact = 0.0
        if n > 1:
            d2 = (xs[:, None] - xs) ** 2 + (ys[:, None] - ys) ** 2
            exact = float(d2.max())
        cap = float(rng.uniform(0, 60))
        got = impl.max_pairwise_sq(xs, ys, cap)
        assert got == (np.inf if exact > cap else exact)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.split(".")[-1])
def test_count_within_radii(impl):
    rng = np.random.default_rng(11)
    px = rng.uniform(0, 8, 300)
    py = rng.uniform(0, 8, 300)
    qx = rng.uniform(0, 8, 40)
    qy = rng.uniform(0, 8, 40)
    c1, c2 = impl.count_within_radii(px, py, qx, qy, 0.5, 3.0)
    d2 = (qx[:, None] - px) ** 2 + (qy[:, None] - py) ** 2
    assert np.array_equal(c1, (d2 <= 0.5).sum(axis=1))
    assert np.array_equal(c2, (d2 <= 3.0).sum(axis=1))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel unavailable")
def test_backends_agree_on_large_instance():
    rng = np.random.default_rng(123)
    n = 4000
    xs = rng.uniform(0, 64, n)
    ys = rng.uniform(0, 64, n)
    a = BACKENDS[0].knn_neighbors(xs, ys, 8)
    b = BACKENDS[1].knn_neighbors(xs, ys, 8)
    assert np.array_equal(a, b)


def test_backend_env_forces_fallback():
    import subprocess
    import sys
    code = "import knnlab; print(knnlab.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code],
                         env={"KNN_LAB_BACKEND": "py", "PATH": "/usr/bin:/bin"},
                         capture_output=True, text=True)
    assert out.stdout.strip() == "py"
