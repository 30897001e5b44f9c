#!/usr/bin/env python3
"""Benchmark the compiled forward-model kernel against the pure-Python one.

Times raw model evaluations over a mixed batch of workloads (no paging,
paging feedback, saturated) and reports per-evaluation cost plus the
speedup.  Run:

    python benchmarks/bench_kernel.py [--count 20000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from opdiag import _kernel_py
from opdiag.model import KERNEL_BACKEND, N_EXTRAS
from opdiag.types import DEFAULT_PROFILE, N_COUNTERS

try:
    from opdiag import _kernel as _kernel_c
except ImportError:
    _kernel_c = None


def make_batch(count: int, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed)
    batch = np.zeros((count, 12))
    batch[:, [0, 2, 4, 7]] = rng.uniform(0.0, 0.02, (count, 4))
    batch[:, [1, 3, 5, 8]] = rng.uniform(0.0, 262144.0, (count, 4))
    batch[:, [6, 9]] = rng.uniform(0.0, 2.68e8, (count, 2))
    batch[:, 6] = np.maximum(batch[:, 6], batch[:, 5])
    batch[:, 9] = np.maximum(batch[:, 9], batch[:, 8])
    batch[:, 10] = rng.uniform(0.0, 64 * 2**20, count)
    batch[:, 11] = rng.uniform(0.0, 1.0, count)
    # a third of the batch: pure single-stream workloads (scenario-like)
    for k in range(0, count, 3):
        keep = [(0, 1), (2, 3), (4, 5, 6), (7, 8, 9)][k % 4]
        mask = np.ones(12, dtype=bool)
        mask[list(keep)] = False
        mask[[10, 11]] = False
        batch[k, mask] = 0.0
    return batch


def run(kernel, batch: np.ndarray, prof: np.ndarray) -> tuple[float, float]:
    counters = np.empty(N_COUNTERS)
    extras = np.empty(N_EXTRAS)
    checksum = 0.0
    t0 = time.perf_counter()
    for row in batch:
        if kernel.evaluate(row, prof, counters, extras) == 0:
            checksum += counters[2]
    return time.perf_counter() - t0, checksum


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    prof = DEFAULT_PROFILE.as_array()
    batch = make_batch(args.count)
    print(f"selected backend at import: {KERNEL_BACKEND}")
    print(f"batch: {args.count} evaluations, best of {args.repeats} repeats\n")

    results = {}
    kernels = [("python", _kernel_py)]
    if _kernel_c is not None:
        kernels.append(("compiled", _kernel_c))
    else:
        print("compiled kernel not available; timing pure Python only")

    checksums = set()
    for name, kernel in kernels:
        best = np.inf
        for _ in range(args.repeats):
            elapsed, checksum = run(kernel, batch, prof)
            best = min(best, elapsed)
        checksums.add(round(checksum, 6))
        results[name] = best
        print(
            f"{name:>9}: {best:8.3f} s total, "
            f"{best / args.count * 1e6:8.2f} us/eval, "
            f"{args.count / best:10.0f} evals/s"
        )

    if len(results) == 2:
        print(f"\nspeedup (python / compiled): {results['python'] / results['compiled']:.1f}x")
        if len(checksums) != 1:
            print("WARNING: kernels disagree on the batch checksum")
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
