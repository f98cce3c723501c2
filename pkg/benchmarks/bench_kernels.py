"""Time the compiled kernels against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 200,500,1000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from cruot.kernels import available_backends


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n, repeat, sweeps=50):
    rng = np.random.default_rng(n)
    C = rng.uniform(-1.0, 1.0, size=(n, n))
    h = rng.standard_normal(n) * 0.01
    Y = rng.standard_normal((n, 2))
    eps = 0.05
    la = np.full(n, eps * np.log(1.0 / n))
    rows = {}
    for name, mod in available_backends().items():
        def loop():
            f, g = np.zeros(n), np.zeros(n)
            # tol=0 forces exactly `sweeps` iterations
            mod.sinkhorn_loop(C, la, la, eps, 1.0, 1.0, f, g, 0.0, sweeps)

        rows[name] = {
            "lse_rows": _best(lambda: mod.lse_rows(C, h, eps), repeat),
            "lse_cols": _best(lambda: mod.lse_cols(C, h, eps), repeat),
            "barycenters": _best(lambda: mod.softmax_barycenters(C, h, eps, Y), repeat),
            f"sinkhorn x{sweeps}": _best(loop, max(1, repeat // 2)),
        }
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="200,500,1000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = list(available_backends())
    print(f"backends: {', '.join(backends)}")
    print(f"{'n':>6} {'kernel':>14} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for n in (int(s) for s in args.sizes.split(",")):
        rows = bench(n, args.repeat)
        for kernel in rows[backends[0]]:
            times = [rows[b][kernel] for b in backends]
            # fallback time over compiled time
            speed = rows["numpy"][kernel] / rows["cython"][kernel] if "cython" in rows else 1.0
            print(f"{n:>6} {kernel:>14} " + " ".join(f"{t * 1e3:>8.2f}ms" for t in times) + f"   {speed:5.1f}x")


if __name__ == "__main__":
    main()
