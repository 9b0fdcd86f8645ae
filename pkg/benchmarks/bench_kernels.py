"""Compare the compiled and pure-Python integration kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]

Each case integrates one 2x2 system and reports the best wall time per
backend, the speed-up and the largest entrywise difference of the results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dampscat import coefficients as C
from dampscat import kernels

CASES = [
    ("fundamental, power-law b, lam=5, t=100", kernels.SYS_FUNDAMENTAL, C.mu_over_1pt(0.3),
     5.0, 0.0, 100.0),
    ("Q1, power-law b, lam=2, t=1e4", kernels.SYS_Q1, C.mu_over_1pt(0.3), 2.0, 0.0, 1e4),
    ("classical Q, integrable b, lam=1, t=1e3", kernels.SYS_CLASSICAL, C.power_law(2.0),
     1.0, 0.0, 1e3),
    ("fundamental, callback b, lam=5, t=100", kernels.SYS_FUNDAMENTAL,
     C.custom(lambda t: 0.3 / (1.0 + t), lambda t: -0.3 / (1.0 + t) ** 2), 5.0, 0.0, 100.0),
]


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-10)
    args = p.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled kernel not built; only the Python backend is available")
        return 1
    eye = np.eye(2, dtype=complex)
    print(f"{'case':45s} {'cython [ms]':>12s} {'python [ms]':>12s} {'speed-up':>9s} "
          f"{'max diff':>10s}")
    for name, system, coeff, lam, s, t in CASES:
        res = {}
        for be in ("cython", "python"):
            res[be] = _best(lambda: kernels.solve(system, coeff, lam, s, s, eye, [t], args.tol,
                                                  backend=be), args.repeat)
        tc, yc = res["cython"]
        tp, yp = res["python"]
        print(f"{name:45s} {1e3 * tc:12.2f} {1e3 * tp:12.2f} {tp / tc:9.1f} "
              f"{np.abs(yc - yp).max():10.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
