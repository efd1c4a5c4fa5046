"""Compiled versus numpy kernels, and one full solve under each backend.

    python3 benchmarks/bench_kernels.py [--sizes 1000 10000 100000] [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from plap import _kernels_py
from plap.grid import interval
from plap.nonlinearity import _jacobi_rule

SOLVE = """
import time, numpy as np
from plap import BACKEND, ProblemSpec, interval, solve_Plambda, gamma1
g = interval(0, 1, {n})
gam = gamma1(np.ones(g.n), 3.0, g).value
spec = ProblemSpec(g, 3.0, 1.0, gam, np.ones(g.n), -np.ones(g.n))
t = time.perf_counter()
reps = solve_Plambda(spec)
print(BACKEND, time.perf_counter() - t, sum(r.converged for r in reps))
"""


def kernel_cases(n, p=3.0, mu=1.0):
    g = interval(0.0, 1.0, n)
    rng = np.random.default_rng(0)
    v = np.ascontiguousarray(rng.normal(size=n))
    rho, dx = np.ascontiguousarray(g.radial_factor), np.ascontiguousarray(g.dx)
    tq, wq = _jacobi_rule(p)
    return {
        "energy": lambda k: k.plap_energy(v, rho, dx, p),
        "gradient": lambda k: k.plap_gradient(v, rho, dx, p),
        "hessian": lambda k: k.plap_hessian(v, rho, dx, p, 1e-6),
        "g": lambda k: k.g_values(v, p, mu),
        "G": lambda k: k.G_values(v, p, mu, tq, wq),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--solve-n", type=int, default=513)
    args = ap.parse_args()
    try:
        from plap import _kernels as compiled
    except ImportError:
        compiled = None
        print("compiled extension not built; timing the numpy kernels only")
    print(f"{'kernel':>9} {'n':>8} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8}")
    for n in args.sizes:
        for name, call in kernel_cases(n).items():
            tp = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat))
            if compiled is None:
                print(f"{name:>9} {n:>8} {1e3 * tp:>11.3f}")
                continue
            tc = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat))
            print(f"{name:>9} {n:>8} {1e3 * tp:>11.3f} {1e3 * tc:>12.3f} {tp / tc:>8.1f}")
    print(f"\nfull pipeline, p=3, lambda=gamma1, h=-1, n={args.solve_n}")
    for pure in ("1", "0"):
        env = dict(os.environ, PLAP_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", SOLVE.format(n=args.solve_n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:>7}: {float(out[1]):.2f} s, {out[2]} solutions")


if __name__ == "__main__":
    main()
