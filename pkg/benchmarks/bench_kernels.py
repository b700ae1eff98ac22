#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends on representative loads.

Usage: python benchmarks/bench_kernels.py [--repeats 5]

The same comparisons can be forced package-wide by setting NFLS_NO_NUMBA=1.
"""

import argparse
import time

import numpy as np

import nfls
from nfls.kernels import _numba, _numpy


def best_of(fn, repeats):
    out = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out = min(out, time.perf_counter() - t0)
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if _numba is None:
        raise SystemExit("numba backend unavailable; nothing to compare")

    lam = nfls.SPEED_OF_LIGHT / 28e9
    rng = np.random.default_rng(0)
    rows = []

    # 2-D location spectrum: N=128 array, 256x256 grid, 16-column basis
    geo = nfls.ula(128, lam / 2, reference="center")
    px, py = geo.positions[:, 0].copy(), geo.positions[:, 1].copy()
    thetas = np.linspace(0.8, 2.4, 256)
    rs = 1 / np.linspace(1 / 30.0, 1 / 3.0, 256)
    basis = rng.standard_normal((128, 16)) + 1j * rng.standard_normal((128, 16))
    a = (px, py, thetas, rs, lam, False, basis)
    _numba.projection_power_nearfield(*a)  # compile
    rows.append(("location spectrum 256x256 (N=128, C=16)",
                 best_of(lambda: _numpy.projection_power_nearfield(*a), args.repeats),
                 best_of(lambda: _numba.projection_power_nearfield(*a), args.repeats)))

    # 1-D electric-angle spectrum: Ns=208 window, 203-column noise basis
    mvec = 2.0 * (129 - np.arange(208, dtype=float))
    gammas = np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, 4096)
    nb = rng.standard_normal((208, 203)) + 1j * rng.standard_normal((208, 203))
    b = (mvec, gammas, nb)
    _numba.projection_power_phase(*b)
    rows.append(("direction spectrum 4096 pts (Ns=208, C=203)",
                 best_of(lambda: _numpy.projection_power_phase(*b), args.repeats),
                 best_of(lambda: _numba.projection_power_phase(*b), args.repeats)))

    # 4-D moving-target objective: 6x6x8x8 grid, 16 samples, N=128
    y = rng.standard_normal((128, 16)) + 1j * rng.standard_normal((128, 16))
    c = (px, py, lam, np.linspace(1.2, 1.5, 6), np.linspace(4.0, 6.0, 6),
         np.linspace(-5.0, 5.0, 8), np.linspace(-5.0, 5.0, 8),
         np.arange(1, 17) * 1e-4, y, False)
    _numba.moving_dml_objective(*c)
    rows.append(("moving DML 6x6x8x8 (N=128, L=16)",
                 best_of(lambda: _numpy.moving_dml_objective(*c), args.repeats),
                 best_of(lambda: _numba.moving_dml_objective(*c), args.repeats)))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>9}  {'numba':>9}  speedup")
    for name, t_np, t_nb in rows:
        print(f"{name:<{width}}  {t_np:>8.3f}s  {t_nb:>8.3f}s  {t_np / t_nb:>6.2f}x")


if __name__ == "__main__":
    main()
