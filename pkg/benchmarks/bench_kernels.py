"""Compare the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 1000,10000,40000] [--k 5,10]
"""

import argparse
import math
import time

import numpy as np

from knnlab import _kernels_py

try:
    from knnlab import _kernels
except ImportError:
    _kernels = None


def time_call(fn, *args, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="1000,10000,40000")
    parser.add_argument("--k", default="5,10")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    ks = [int(s) for s in args.k.split(",")]

    if _kernels is None:
        print("compiled extension not available; timing the fallback only")

    rng = np.random.default_rng(0)
    header = f"{'n':>7} {'k':>3} {'kernel':>12} {'c [ms]':>10} {'py [ms]':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        side = math.sqrt(n)
        xs = rng.uniform(0, side, n)
        ys = rng.uniform(0, side, n)
        for k in ks:
            t_py, nbr = time_call(_kernels_py.knn_neighbors, xs, ys, k)
            if _kernels is not None:
                t_c, nbr_c = time_call(_kernels.knn_neighbors, xs, ys, k)
                assert np.array_equal(nbr, nbr_c)
            else:
                t_c = math.nan
            print(f"{n:>7} {k:>3} {'knn':>12} {1e3*t_c:>10.2f} {1e3*t_py:>10.2f} "
                  f"{t_py/t_c:>8.1f}" if _kernels else
                  f"{n:>7} {k:>3} {'knn':>12} {'-':>10} {1e3*t_py:>10.2f} {'-':>8}")

        src = np.repeat(np.arange(n, dtype=np.int32), ks[0])
        dst = np.ascontiguousarray(nbr[:, :ks[0]].ravel())
        t_py, lab = time_call(_kernels_py.component_labels, n, src, dst)
        if _kernels is not None:
            t_c, lab_c = time_call(_kernels.component_labels, n, src, dst)
            assert np.array_equal(lab, lab_c)
            print(f"{n:>7} {'-':>3} {'components':>12} {1e3*t_c:>10.2f} {1e3*t_py:>10.2f} "
                  f"{t_py/t_c:>8.1f}")

        m = min(n, 3000)
        t_py, d_py = time_call(_kernels_py.max_pairwise_sq, xs[:m], ys[:m], math.inf)
        if _kernels is not None:
            t_c, d_c = time_call(_kernels.max_pairwise_sq, xs[:m], ys[:m], math.inf)
            assert d_py == d_c
            print(f"{m:>7} {'-':>3} {'diameter':>12} {1e3*t_c:>10.2f} {1e3*t_py:>10.2f} "
                  f"{t_py/t_c:>8.1f}")


if __name__ == "__main__":
    main()
