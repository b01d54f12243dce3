#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--prompts N] [--models M] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from erproute import _kernels_py
from erproute.kernels import tie_rank_by_cost

try:
    from erproute import _kernels_cy
except ImportError:
    _kernels_cy = None


def bench(label, impls, make_args, repeat):
    results = {}
    for name, impl in impls:
        args = make_args()
        timer = timeit.Timer(lambda: getattr(impl, label)(*args))
        results[name] = min(timer.repeat(repeat=repeat, number=1))
    line = f"{label:24s}"
    for name, seconds in results.items():
        line += f"  {name}: {seconds * 1e3:9.3f} ms"
    if "native" in results and results["native"] > 0:
        line += f"  speedup: {results['python'] / results['native']:5.2f}x"
    print(line)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--prompts", type=int, default=500_000)
    parser.add_argument("--models", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    impls = [("python", _kernels_py)]
    if _kernels_cy is not None:
        impls.append(("native", _kernels_cy))
    else:
        print("compiled extension unavailable; benchmarking the fallback only")

    rng = np.random.default_rng(0)
    values = rng.normal(size=(args.prompts, args.models))
    costs = np.sort(rng.uniform(1, 100, size=args.models))
    adjusted = 0.01 * costs
    rank = tie_rank_by_cost(costs)
    scores = rng.normal(size=args.prompts)
    labels = (rng.uniform(size=args.prompts) < 0.5).view(np.uint8)

    print(f"n = {args.prompts}, M = {args.models} (best of {args.repeat})")
    bench("cost_adjusted_argmax", impls, lambda: (values, adjusted, rank), args.repeat)
    bench("auroc_rank", impls, lambda: (scores.copy(), labels), args.repeat)
    bench("argmax_tie_weights", impls, lambda: (values,), args.repeat)


if __name__ == "__main__":
    main()
