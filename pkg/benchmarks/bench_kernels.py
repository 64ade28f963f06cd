"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--count 200000] [--dim 16] [--repeat 5]

Prints best-of-N wall time per kernel and the speedup. Outputs are checked for
agreement before timing.
"""
import argparse
import time

import numpy as np

from anisosmooth import _backend, _fallback


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if _backend.compiled is None:
        print("compiled kernels unavailable; only the numpy fallback is installed")
        return
    c, f = _backend.compiled, _fallback
    seed, stream, start = 12345, 7, 0
    cases = {
        "uniforms": lambda m: m.uniforms(seed, stream, start, args.count, args.dim),
        "normals": lambda m: m.normals(seed, stream, start, args.count, args.dim),
        "laplaces": lambda m: m.laplaces(seed, stream, start, args.count, args.dim),
    }
    p = np.random.default_rng(0).uniform(1e-12, 1 - 1e-12, args.count * args.dim)
    cases["ndtri"] = lambda m: m.ndtri(p)

    print(f"{args.count} samples x dim {args.dim}, best of {args.repeat}")
    print(f"{'kernel':10s} {'numpy s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, run in cases.items():
        np.testing.assert_allclose(run(c), run(f), rtol=0, atol=1e-14)
        tf = best_of(lambda: run(f), args.repeat)
        tc = best_of(lambda: run(c), args.repeat)
        print(f"{name:10s} {tf:10.4f} {tc:10.4f} {tf / tc:7.1f}x")


if __name__ == "__main__":
    main()
