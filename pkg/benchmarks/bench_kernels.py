"""Time the compiled user scan against the numpy fallback.

    python benchmarks/bench_kernels.py [--grid N] [--repeat K]

Both backends must return identical choices; the script checks that before
timing anything.
"""

import argparse
import time

import numpy as np

from priomarket import kernels, calibration_cps, calibration_params
from priomarket.model import TIE_TOL, cp_positions


def inputs(N, M):
    params = calibration_params(M=M)
    cps = calibration_cps(M=M)
    d = np.full(M, params.d0)
    d[M // 2] = 4.5
    S = np.array([cp.S for cp in cps])
    xs = np.linspace(0.0, 1.0, N)
    a = params.V - d - S
    b = params.theta * (params.V - d) - S
    return xs, cp_positions(M), a, b, params.t, params.theta * params.t, params.F


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=100001)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not kernels.compiled_available():
        print("compiled kernel not built; only the numpy path is available")
        return

    print(f"{'M':>4} {'N':>9} {'cython ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for M in (3, 6, 12, 24):
        args_ = inputs(args.grid, M)
        run = {be: (lambda be=be: kernels.scan_users(*args_, TIE_TOL, backend=be)) for be in ("cython", "numpy")}
        pc, sc, uc = run["cython"]()
        pn, sn, un = run["numpy"]()
        assert np.array_equal(pc, pn) and np.array_equal(sc, sn) and np.array_equal(uc, un)
        tc = best_of(run["cython"], args.repeat)
        tn = best_of(run["numpy"], args.repeat)
        print(f"{M:>4} {args.grid:>9} {tc * 1e3:>10.2f} {tn * 1e3:>10.2f} {tn / tc:>8.1f}x")


if __name__ == "__main__":
    main()
