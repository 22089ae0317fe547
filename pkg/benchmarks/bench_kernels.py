"""Time the numba kernels against their numpy twins on a synthetic stream.

    python3 benchmarks/bench_kernels.py [--users N] [--repeat R]
"""

import argparse
import time

import numpy as np

from adsdp import _kernels
from adsdp.synth import SynthSpec, generate


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--users", type=int, default=100_000)
    ap.add_argument("--publishers", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    s = generate(SynthSpec("zipf", args.users, args.publishers, 31, seed=0))
    keys = s.day * s.n_users + s.user
    rank = s.day_rank[s.entry_conv]
    bound = np.full(s.n_days, 3, dtype=np.int64)
    counts = np.concatenate([s.day_counts(i) for i in range(s.n_days)])
    print(f"{s.n_conversions} conversions, {s.n_users} users, {s.n_publishers} publishers")

    cases = {
        "group_rank": lambda impl: getattr(_kernels, f"group_rank_{impl}")(keys),
        "run_lengths": lambda impl: getattr(_kernels, f"run_lengths_{impl}")(keys),
        "clipped_sums": lambda impl: getattr(_kernels, f"clipped_sums_{impl}")(
            s.entry_day, s.entry_pub, s.entry_weight, rank, bound, s.n_days, s.n_publishers
        ),
        "count_above": lambda impl: getattr(_kernels, f"count_above_{impl}")(counts, 2.5),
    }
    impls = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    print(f"{'kernel':14s}" + "".join(f"{i:>12s}" for i in impls) + "     speedup")
    for name, call in cases.items():
        t = {i: best_of(lambda i=i: call(i), args.repeat) for i in impls}
        line = f"{name:14s}" + "".join(f"{t[i] * 1e3:10.2f}ms" for i in impls)
        if "numba" in t:
            line += f"  {t['numpy'] / t['numba']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
