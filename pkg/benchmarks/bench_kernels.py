"""Compare the GMP extension kernel with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--reps 200]

Both kernels are fed the same scalars and their outputs are checked equal
before any timing is reported.
"""
import argparse
import statistics
import sys
import time

from clshare import group
from clshare.rng import HashDrbg
from clshare.scenario import Scenario, run_scenario


def _time(fn, reps):
    samples = []
    for _ in range(5):
        t = time.perf_counter()
        for _ in range(reps):
            fn()
        samples.append((time.perf_counter() - t) / reps)
    return statistics.median(samples)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()
    backends = group.available_backends()
    if "gmp" not in backends:
        print("compiled kernel not built; only the pure kernel is available", file=sys.stderr)
    rng = HashDrbg(42)
    scalars = [group.random_scalar(rng) for _ in range(args.reps)]
    point = group.scalar_mult(group.random_scalar(rng), group.GENERATOR)

    results, outputs = {}, {}
    original = group.backend()
    try:
        for name in backends:
            group.set_backend(name)
            outputs[name] = [group.scalar_mult(k, point).encode() for k in scalars[:20]]
            it_b, it_v = iter(scalars * 5), iter(scalars * 5)
            fixed = _time(lambda: group.scalar_mult(next(it_b), group.GENERATOR), args.reps // 5 or 1)
            var = _time(lambda: group.scalar_mult(next(it_v), point), args.reps // 5 or 1)
            t = time.perf_counter()
            run_scenario(Scenario(protocol="segds", members=5, file_size=65536, seed=1))
            e2e = time.perf_counter() - t
            results[name] = (fixed, var, e2e)
    finally:
        group.set_backend(original)

    if len({tuple(v) for v in outputs.values()}) != 1:
        print("kernel outputs differ", file=sys.stderr)
        return 1
    print(f"{'kernel':<8}{'k*G (us)':>12}{'k*P (us)':>12}{'segds N=5 (ms)':>17}")
    for name, (fixed, var, e2e) in results.items():
        print(f"{name:<8}{fixed * 1e6:>12.1f}{var * 1e6:>12.1f}{e2e * 1e3:>17.1f}")
    if {"gmp", "pure"} <= results.keys():
        g, p = results["gmp"], results["pure"]
        print(f"speedup  {p[0] / g[0]:>11.1f}x{p[1] / g[1]:>11.1f}x{p[2] / g[2]:>16.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
