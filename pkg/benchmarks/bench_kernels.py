"""Compare the numba and numpy Weyl kernels, plus one full exact RC average.

    python benchmarks/bench_kernels.py [--repeat 5]

The end-to-end timing uses whichever backend the process selected; run it
again with RCMEAS_DISABLE_NUMBA=1 for the numpy path.
"""

import argparse
import functools
import time

import numpy as np

from rcmeas import _kernels as K
from rcmeas.instruments import random_instrument
from rcmeas.rc import rc_average_exact
from rcmeas.weyl import QuditDims


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_table(repeat):
    rows = []
    for d, n in [(2, 2), (3, 2), (2, 3), (5, 2)]:
        D = d**n
        rng = np.random.default_rng(0)
        S = rng.normal(size=(D * D, D * D)) + 1j * rng.normal(size=(D * D, D * D))
        add, dot, omega = K.tables(d, n)
        c = K.numpy_weyl_coefficients(S, add, dot, omega, d)
        cases = {
            "coefficients": (K.numpy_weyl_coefficients, K.numba_weyl_coefficients, (S,)),
            "expand": (K.numpy_weyl_expand, K.numba_weyl_expand, (c,)),
            "apply_left": (K.numpy_weyl_apply_left, K.numba_weyl_apply_left, (S, 1, 1)),
            "apply_right": (K.numpy_weyl_apply_right, K.numba_weyl_apply_right, (S, 1, 1)),
        }
        for name, (f_np, f_nb, args) in cases.items():
            full = args + (add, dot, omega, d)
            if f_nb is not None:
                f_nb(*full)  # compile outside the timing
                ref, got = f_np(*full), f_nb(*full)
                assert np.allclose(ref, got, atol=1e-10), name
            t_np = best_of(functools.partial(f_np, *full), repeat)
            t_nb = best_of(functools.partial(f_nb, *full), repeat) if f_nb is not None else float("nan")
            rows.append((f"d={d} n={n}", name, t_np, t_nb))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'size':<10}{'kernel':<14}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for size, name, t_np, t_nb in kernel_table(args.repeat):
        print(f"{size:<10}{name:<14}{t_np * 1e3:12.3f}{t_nb * 1e3:12.3f}{t_np / t_nb:10.1f}")

    inst = random_instrument(QuditDims(2, 3), (2,), np.random.default_rng(1))
    rc_average_exact(inst)
    t = best_of(lambda: rc_average_exact(inst), max(1, args.repeat // 2))
    print(f"exact RC average d=2 n=3 m=1 ({K.backend()} backend): {t:.3f} s")


if __name__ == "__main__":
    main()
