"""Benchmark the compiled transportation-simplex kernel against the
pure-numpy fallback on growing uniform-weight instances.

Run:  python benchmarks/bench_solver.py [--max-side 800] [--csv out.csv]
"""

import argparse
import time

import numpy as np

from snotlab import costs
from snotlab import _simplex_py

try:
    from snotlab import _simplex

    HAVE_COMPILED = True
except ImportError:
    _simplex = None
    HAVE_COMPILED = False


def one_instance(side, rng):
    x = rng.uniform(-1, 1, size=(side, 3))
    y = rng.uniform(-1, 1, size=(side, 3))
    c = costs.cost_matrix(costs.sq_half(2.0), x, y)
    a = np.full(side, 1.0 / side)
    # index-scaled perturbation, as the solver wrapper applies
    a = a + 1e-17 * (np.arange(side) + 1.0)
    b = np.full(side, 1.0 / side)
    b[-1] += 1e-17 * (side * (side + 1)) / 2.0
    return c, a, b


def timed(kernel, c, a, b):
    t0 = time.perf_counter()
    bi, bj, flow, u, v, pivots = kernel.solve_transport(c, a, b)
    elapsed = time.perf_counter() - t0
    cost = float((flow * c[bi, bj]).sum())
    return elapsed, pivots, cost


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--max-side", type=int, default=800)
    parser.add_argument("--csv", default=None)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    sides = [s for s in (50, 100, 200, 400, 800, 1600) if s <= args.max_side]
    rows = []
    print(f"{'side':>6} {'python (s)':>12} {'compiled (s)':>13} {'speedup':>8}  cost match")
    for side in sides:
        c, a, b = one_instance(side, rng)
        t_py, piv_py, cost_py = timed(_simplex_py, c, a, b)
        if HAVE_COMPILED:
            t_cy, piv_cy, cost_cy = timed(_simplex, c, a, b)
            match = abs(cost_py - cost_cy) < 1e-9
            print(f"{side:>6} {t_py:>12.3f} {t_cy:>13.4f} {t_py / t_cy:>8.1f}  {match}")
            rows.append((side, t_py, t_cy, t_py / t_cy, int(match)))
        else:
            print(f"{side:>6} {t_py:>12.3f} {'n/a':>13} {'n/a':>8}  -")
            rows.append((side, t_py, float("nan"), float("nan"), -1))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("side,python_s,compiled_s,speedup,cost_match\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")
    if not HAVE_COMPILED:
        print("compiled kernel unavailable; built fallback timings only")


if __name__ == "__main__":
    main()
