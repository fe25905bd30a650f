"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N wall time for each backend and
the speed-up, after checking that the two backends agree.
"""
import argparse
import timeit

import numpy as np

from gsdelab import _kernels_py as py
from gsdelab import kernels

CASES = {
    "normal_block 20000x64x1": (lambda b: b.normal_block(7, 0, 20000, 64, 1), "allclose"),
    "normal_block 2000x64x3": (lambda b: b.normal_block(7, 0, 2000, 64, 3), "allclose"),
    "gheat_steps n_x=401 n_t=700": (
        lambda b: b.gheat_steps(np.abs(np.linspace(-8, 8, 401)), 700, 1.0 / 700, 0.04, 0.5, 1.0, 0), "equal"),
}


def _lattice_case(b):
    n = 400
    v = np.linspace(-1, 1, 2 * n + 1) ** 2
    pd = pu = np.array([0.25, 0.5])
    pm = 1 - 2 * pd
    qv = np.array([0.5, 1.0]) / n
    for k in range(n, 0, -1):
        z = np.zeros(2 * k - 1)
        v, _ = b.lattice_step(v, pd, pm, pu, qv, z, z, 1.0 / n)
    return v


CASES["lattice 400 backward steps"] = (_lattice_case, "equal")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cy = kernels.compiled_backend
    if cy is None:
        print("compiled extension not available; only the numpy fallback can be timed")
    print(f"{'kernel':<30} {'python [ms]':>12} {'cython [ms]':>12} {'speed-up':>9}  agree")
    for name, (fn, mode) in CASES.items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:<30} {tp:12.2f} {'-':>12} {'-':>9}")
            continue
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        a, b = np.asarray(fn(py)), np.asarray(fn(cy))
        ok = np.array_equal(a, b) if mode == "equal" else np.allclose(a, b, rtol=1e-13, atol=1e-14)
        print(f"{name:<30} {tp:12.2f} {tc:12.2f} {tp / tc:8.1f}x  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
