"""Timing comparison of the compiled kernels against the numpy fallback.

Runs each hot kernel (symmetric KDE, one-at-a-time coordinate sweep, lasso
coordinate-descent path) in two subprocesses -- one with PROBE_NUMBA=1 and
one with PROBE_NUMBA=0 -- and prints a side-by-side table.

Usage:  python benchmarks/kernel_bench.py [--reps 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _bench(fn, reps):
    fn()  # warm-up (triggers jit compilation in the accelerated mode)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_child(reps):
    from probe.kernels import kde_at_points, lasso_cd_path, oaat_sweep

    rng = np.random.default_rng(0)
    results = {}

    t = rng.standard_normal(4000)
    results["kde_at_points (M=4000)"] = _bench(lambda: kde_at_points(t, 0.3), reps)

    n, m = 400, 2000
    x = np.ascontiguousarray(rng.standard_normal((n, m)))
    y = rng.standard_normal(n)
    csn = np.einsum("ij,ij->j", x, x)
    beta = rng.standard_normal(m) * 0.1
    p = rng.uniform(0.0, 0.3, m)
    w = x @ (p * beta)
    v = (x * x) @ (beta * beta * p * (1 - p))
    results["oaat_sweep (n=400, M=2000)"] = _bench(
        lambda: oaat_sweep(x, y, csn, beta, p, 1.0, w, v), reps)

    m2 = 1000
    xs = np.ascontiguousarray(rng.standard_normal((n, m2)))
    csn2 = np.einsum("ij,ij->j", xs, xs)
    lams = np.geomspace(1.0, 1e-3, 50)
    results["lasso_cd_path (n=400, M=1000, 50 lambdas)"] = _bench(
        lambda: lasso_cd_path(xs, y, csn2, lams), reps)

    print(json.dumps(results))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--mode", choices=["driver", "child"], default="driver")
    args = ap.parse_args()

    if args.mode == "child":
        run_child(args.reps)
        return

    timings = {}
    for flag, label in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, PROBE_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--mode", "child", "--reps", str(args.reps)],
            env=env, capture_output=True, text=True, check=True)
        timings[label] = json.loads(out.stdout.strip().splitlines()[-1])

    width = max(len(k) for k in timings["numba"])
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in timings["numba"]:
        a = timings["numba"][name]
        b = timings["numpy"][name]
        print(f"{name:<{width}}  {a * 1e3:9.2f}ms  {b * 1e3:9.2f}ms  {b / a:7.1f}x")


if __name__ == "__main__":
    main()
