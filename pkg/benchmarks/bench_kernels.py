"""Timing comparison of the compiled kernels against the numpy fallbacks.

Run directly: ``python3 benchmarks/bench_kernels.py [--sizes 4096,65536,1048576]``
The compiled path is whatever ``snsm.kernels`` selected at import time
(set SNSM_DISABLE_NUMBA=1 to force the fallback and compare it to itself).
"""

import argparse
import timeit

import numpy as np

from snsm import kernels


def _time(fn, *args, repeat=5, number=20):
    fn(*args)  # warm-up: triggers JIT compilation on the compiled path
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def bench(sizes):
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    header = f"{'kernel':<18}{'d':>10}{'active (us)':>14}{'numpy (us)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for d in sizes:
        c = max(1, int(np.sqrt(d)) // 2)
        g = rng.standard_normal(d)
        x = rng.standard_normal(d)
        a = rng.integers(0, c, size=d)
        denoms = np.abs(rng.standard_normal(c)) + 0.1
        n_pow2 = 1 << (d.bit_length() - 1)
        v = rng.standard_normal(n_pow2)
        cases = [
            ("segment_sqnorms", kernels.segment_sqnorms,
             kernels.numpy_impls["segment_sqnorms"], (g, a, c)),
            ("segment_sums", kernels.segment_sums,
             kernels.numpy_impls["segment_sums"], (g, a, c)),
            ("sn_apply_flat", kernels.sn_apply_flat,
             kernels.numpy_impls["sn_apply_flat"], (x, g, denoms, a, 0.01)),
            ("fwht", lambda arr: kernels.fwht(arr.copy()),
             lambda arr: kernels.numpy_impls["fwht"](arr.copy()), (v,)),
        ]
        for name, active, fallback, args in cases:
            t_active = _time(active, *args)
            t_numpy = _time(fallback, *args)
            print(f"{name:<18}{d:>10}{t_active * 1e6:>14.2f}"
                  f"{t_numpy * 1e6:>14.2f}{t_numpy / t_active:>10.2f}x")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", default="4096,65536,1048576",
                   help="comma-separated problem sizes")
    args = p.parse_args()
    bench([int(s) for s in args.sizes.split(",")])


if __name__ == "__main__":
    main()
