"""Compare the Cython and pure-Python simulation kernels.

Runs the same congested grid scenario on every available backend, reports
ticks/second, and fails if the final state digests diverge (the compiled
kernel must be bit-identical to the reference).

Usage: python benchmarks/bench_sim.py [--grid 3x4] [--ticks 3600] [--seed 7]
"""

from __future__ import annotations

import argparse
import time

from dglight.run import make_fixed_time, run_episode
from dglight.sim import available_backends, build_grid, set_backend, step


def bench_backend(backend: str, rows: int, cols: int, ticks: int, seed: int):
    set_backend(backend)
    state = build_grid(rows, cols, seed=seed)
    t0 = time.perf_counter()
    step(state, ticks)
    elapsed = time.perf_counter() - t0
    return elapsed, state.digest(), state.entered, state.departed


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", default="3x4")
    parser.add_argument("--ticks", type=int, default=3600)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    rows, cols = (int(v) for v in args.grid.lower().split("x"))

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    results = {}
    for backend in backends:
        elapsed, digest, entered, departed = bench_backend(
            backend, rows, cols, args.ticks, args.seed)
        results[backend] = (elapsed, digest)
        print(f"{backend:>8}: {args.ticks / elapsed:>10.0f} ticks/s "
              f"({elapsed:.3f}s for {args.ticks} ticks, "
              f"{entered} entered / {departed} departed)")

    digests = {d for _, d in results.values()}
    if len(digests) != 1:
        print("FAIL: backends disagree on the final state digest")
        for backend, (_, d) in results.items():
            print(f"  {backend}: {d}")
        return 1
    print(f"digest parity OK ({digests.pop()[:16]}...)")

    if "cython" in results and "python" in results:
        speedup = results["python"][0] / results["cython"][0]
        print(f"cython speedup: {speedup:.1f}x")
    set_backend("auto")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
