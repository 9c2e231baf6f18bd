"""Numba vs numpy timings for the two hot loops.

Run ``python benchmarks/bench_accel.py``.  Both backends live in the same
process; the numba one is warmed up before timing.
"""
import argparse
import time

import numpy as np

from helmgp import _engine
from helmgp._accel import use_numba
from helmgp.fields import AnalyticField, SimGrid
from helmgp.kernels import PriorSpec


def best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_gram(M, repeats):
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, (M, 2))
    plan = PriorSpec("helmholtz", 1.0, 1.0, 1.5, 0.5, 0.1).kernel().plan()
    out = {}
    for backend in ("numba", "numpy"):
        _engine.assemble(X[:3], X[:3], plan, backend=backend)
        out[backend] = best_of(lambda: _engine.assemble(X, X, plan, backend=backend), repeats)
    return out


def bench_advect(B, repeats):
    grid = SimGrid.square(-4, 4, 30)
    U, V = grid.sample(AnalyticField.duffing(0.5))
    starts = np.random.default_rng(1).uniform(-1, 1, (B, 2))
    out = {}
    for backend in ("numba", "numpy"):
        _engine.advect(grid.x1, grid.x2, U, V, starts[:1], 1, 2, 1e-3, 0.0, backend=backend)
        out[backend] = best_of(lambda: _engine.advect(grid.x1, grid.x2, U, V, starts, 4, 250,
                                                      1e-3, 0.0, backend=backend), repeats)
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--M", type=int, default=400, help="points in the Gram benchmark")
    p.add_argument("--buoys", type=int, default=50)
    p.add_argument("--repeats", type=int, default=3)
    a = p.parse_args()
    if not use_numba():
        print("numba disabled: the 'numba' column runs the same functions uncompiled")
    print(f"{'kernel':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for name, res in ((f"helmholtz gram M={a.M}", bench_gram(a.M, a.repeats)),
                      (f"rk4 advect buoys={a.buoys}", bench_advect(a.buoys, a.repeats))):
        print(f"{name:<28}{res['numba']:>12.4f}{res['numpy']:>12.4f}{res['numpy'] / res['numba']:>10.1f}")


if __name__ == "__main__":
    main()
