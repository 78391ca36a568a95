#!/usr/bin/env python3
"""Benchmark the compiled geometry kernels against the pure-Python backend.

Runs each kernel on both backends and prints a timing table. The compiled
backend must be built (pip install -e . or python setup.py build_ext
--inplace); without it, only the pure column is reported.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from abground._kernels import pure

try:
    from abground._kernels import _fast
except ImportError:
    _fast = None


def _boxes(rng, n):
    xy = rng.random((n, 2)) * 800
    wh = rng.random((n, 2)) * 150 + 1
    return np.concatenate([xy, xy + wh], axis=1)


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    a1000 = _boxes(rng, 1000)
    b1000 = _boxes(rng, 1000)
    big = _boxes(rng, 100_000)
    scalars = [tuple(row) for row in _boxes(rng, 2000)]

    benches = [
        ("iou_matrix 1000x1000",
         lambda mod: mod.iou_matrix(a1000, b1000)),
        ("quantize_batch 100k",
         lambda mod: mod.quantize_batch(big, 1024, 1024)),
        ("dequantize_batch 100k",
         lambda mod: mod.dequantize_batch(
             np.clip(big, 0, 1000).astype(np.int64), 1024, 1024)),
        ("scalar iou x2000",
         lambda mod: [mod.iou(*p, *q)
                      for p, q in zip(scalars[:1000], scalars[1000:])]),
    ]

    print(f"{'kernel':<24} {'pure':>12} {'compiled':>12} {'speedup':>9}")
    print("-" * 60)
    for name, fn in benches:
        t_pure = timeit(lambda: fn(pure), args.repeat)
        if _fast is not None:
            t_fast = timeit(lambda: fn(_fast), args.repeat)
            print(f"{name:<24} {t_pure * 1e3:>10.2f}ms {t_fast * 1e3:>10.2f}ms "
                  f"{t_pure / t_fast:>8.1f}x")
        else:
            print(f"{name:<24} {t_pure * 1e3:>10.2f}ms {'n/a':>12} {'':>9}")

    if _fast is None:
        print("\ncompiled backend not built; showing pure timings only")


if __name__ == "__main__":
    main()
