"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from cfextract import kernels


def bench(fn, args, repeats):
    fn(*args)  # warm-up (and JIT compile)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    rows = []
    for T, cap in [(32, 16), (128, 116), (512, 116)]:
        start, end = rng.normal(size=T), rng.normal(size=T)
        call = (start, end, 1, T, cap)
        assert kernels.best_pair_numba(*call) == kernels.best_pair_numpy(*call)
        rows.append((f"best_pair T={T} cap={cap}", bench(kernels.best_pair_numba, call, args.repeats),
                     bench(kernels.best_pair_numpy, call, args.repeats)))

    for n, d in [(1000, 2000), (10000, 20000)]:
        X = sp.random(n, d, density=0.005, random_state=args.seed, format="csr")
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        w = rng.normal(size=d)
        call = (X, y, w, 0.1, 1e-4, kernels.HINGE)
        reps = max(args.repeats // 10, 3)
        rows.append((f"hinge objective {n}x{d}", bench(kernels.linear_objective_numba, call, reps),
                     bench(kernels.linear_objective_numpy, call, reps)))

    print(f"{'kernel':<32}{'numba us':>12}{'numpy us':>12}{'speed-up':>10}")
    for name, a, b in rows:
        print(f"{name:<32}{a * 1e6:>12.1f}{b * 1e6:>12.1f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
