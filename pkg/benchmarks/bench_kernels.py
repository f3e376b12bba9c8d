"""Time the compiled tally kernel against its pure-Python twin.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5]

Workloads mimic what run_experiment feeds the kernel: one call per
replicate over the occupied cells only, so the array length is the number
of distinct cells hit, not m.  Sizes below span the sparse regime (tens of
occupied cells) up to dense high-n tallies.
"""

import argparse
import timeit

import numpy as np

from chi2_regimes._kernels import _pykernels

try:
    from chi2_regimes._kernels import _ckernels
except ImportError:
    _ckernels = None


def make_workload(rng, occupied):
    counts = rng.integers(1, 6, size=occupied)
    counts[rng.integers(0, occupied)] = 40  # one heavy cell
    probs = rng.uniform(1e-6, 1.0, size=occupied)
    probs /= probs.sum() * 1.1
    return (
        np.ascontiguousarray(counts, dtype=np.int64),
        np.ascontiguousarray(probs, dtype=np.float64),
        int(counts.sum()),
    )


def bench(fn, workloads, repeats):
    def run_all():
        for counts, probs, n in workloads:
            fn(counts, probs, n)

    return min(timeit.repeat(run_all, number=1, repeat=repeats))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(12345)
    print(f"{'occupied cells':>14} {'calls':>6} {'python':>12} {'c':>12} {'speedup':>8}")
    for occupied, calls in ((32, 20000), (512, 4000), (8192, 400), (131072, 30)):
        workloads = [make_workload(rng, occupied) for _ in range(calls)]
        t_py = bench(_pykernels.tally, workloads, args.repeats)
        if _ckernels is None:
            print(f"{occupied:>14} {calls:>6} {t_py:>11.4f}s {'not built':>12} {'-':>8}")
            continue
        t_c = bench(_ckernels.tally, workloads, args.repeats)
        for counts, probs, n in workloads[:5]:
            assert _pykernels.tally(counts, probs, n) == _ckernels.tally(
                counts, probs, n
            ), "backend outputs diverged"
        print(
            f"{occupied:>14} {calls:>6} {t_py:>11.4f}s {t_c:>11.4f}s "
            f"{t_py / t_c:>7.1f}x"
        )
    if _ckernels is None:
        print("compiled kernel unavailable; showing pure-Python timings only")


if __name__ == "__main__":
    main()
