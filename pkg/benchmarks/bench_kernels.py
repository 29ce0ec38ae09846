"""Compare the compiled numeric backend against the pure NumPy fallback.

Times the three hot paths on shapes matching real runs (64-vs-64 score
batches, 199 permutations, a 3000-row buffer for scorer fits) and prints a
side-by-side table. Run with:

    python3 benchmarks/bench_kernels.py            # both backends
    OCLADS_PURE_PYTHON=1 oclads nulltest ...       # force the fallback
"""

from __future__ import annotations

import time

import numpy as np

from oclads import _kernels_py as pure

try:
    from oclads import _kernels as compiled
except ImportError:
    compiled = None


def _pooled(rng, n1, n2):
    pooled = np.concatenate([rng.standard_normal(n1), rng.standard_normal(n2) + 0.3])
    order = np.argsort(pooled, kind="stable")
    values = np.ascontiguousarray(pooled[order])
    is_first = np.ascontiguousarray((order < n1).astype(np.float64))
    return values, is_first


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def build_cases(rng):
    values, is_first = _pooled(rng, 64, 64)
    assignments = rng.permuted(np.tile(is_first, (199, 1)), axis=1)
    assignments = np.ascontiguousarray(assignments)
    train = np.ascontiguousarray(rng.standard_normal((3000, 16)))
    test = np.ascontiguousarray(rng.standard_normal((64, 16)))
    small_train = np.ascontiguousarray(rng.standard_normal((640, 16)))
    return [
        (
            "t_l2_sorted (128 pooled)",
            lambda impl: impl.t_l2_sorted(values, is_first, 64, 64),
            2000,
        ),
        (
            "perm_stats_sorted (199 x 128)",
            lambda impl: impl.perm_stats_sorted(values, assignments, 64, 64),
            200,
        ),
        (
            "kernel_mean_scores (3000 train, 64 test)",
            lambda impl: impl.kernel_mean_scores(train, test, 1.2),
            50,
        ),
        (
            "pairwise_distances (640 rows)",
            lambda impl: impl.pairwise_distances(small_train),
            20,
        ),
    ]


def main() -> None:
    rng = np.random.default_rng(0)
    cases = build_cases(rng)
    backends = [("pure-python", pure)] + ([("compiled", compiled)] if compiled else [])
    if compiled is None:
        print("compiled extension not importable; timing the fallback only\n")

    name_width = max(len(name) for name, _, _ in cases)
    header = f"{'kernel':<{name_width}}  " + "".join(f"{n:>14}" for n, _ in backends)
    if compiled is not None:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call, repeats in cases:
        times = [_time(lambda impl=impl: call(impl), repeats) for _, impl in backends]
        row = f"{name:<{name_width}}  " + "".join(f"{t * 1e6:>12.1f}us" for t in times)
        if compiled is not None:
            row += f"{times[0] / times[1]:>9.2f}x"
        print(row)

    # sanity: both backends must produce the same numbers
    if compiled is not None:
        values, is_first = _pooled(rng, 50, 70)
        a = pure.t_l2_sorted(values, is_first, 50, 70)
        b = compiled.t_l2_sorted(values, is_first, 50, 70)
        assert abs(a - b) < 1e-12, (a, b)
        print("\nbackends agree on a spot check (|diff| < 1e-12)")


if __name__ == "__main__":
    main()
