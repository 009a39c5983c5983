#!/usr/bin/env python3
# Copyright 2026 The pwlbo Authors.
# SPDX-License-Identifier: Apache-2.0
"""Recompute the benchmark reference minima stored in src/benchmarks.cpp.

Each function is searched on a dense grid and the best grid points are
refined with a bounded local optimizer. Michalewicz is separable, so it is
minimized one coordinate at a time. KS224 is refined under its linear
constraints.

Usage: derive_reference_minima.py [--density N]
"""

import argparse
import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar


def bumpy(x):
    return -sum(i * math.sin((i + 1) * x[0] + i) for i in range(1, 7))


def multimodal(x):
    return math.sin(x[0]) + math.sin(10.0 / 3.0 * x[0])


def ackley(x):
    a = -20.0 * math.exp(-0.2 * math.sqrt(0.5 * (x[0] ** 2 + x[1] ** 2)))
    b = -math.exp(0.5 * (math.cos(2 * math.pi * x[0]) + math.cos(2 * math.pi * x[1])))
    return a + b + 20.0 + math.e


def branin(x):
    b, c, r, s, t = 5.1 / (4 * math.pi**2), 5 / math.pi, 6.0, 10.0, 1 / (8 * math.pi)
    return (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2 + s * (1 - t) * math.cos(x[0]) + s


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


HART_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HART_A = np.array([[3, 10, 30], [0.1, 10, 35], [3, 10, 30], [0.1, 10, 35]])
HART_P = 1e-4 * np.array([[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]])


def hartmann(x):
    x = np.asarray(x)
    return -float(np.sum(HART_ALPHA * np.exp(-np.sum(HART_A * (x - HART_P) ** 2, axis=1))))


def michalewicz_term(i, v):
    return -math.sin(v) * math.sin((i + 1) * v * v / math.pi) ** 20


def ks224(x):
    return 2 * x[0] ** 2 + x[1] ** 2 - 48 * x[0] - 40 * x[1]


KS224_CONSTRAINTS = [
    {"type": "ineq", "fun": lambda x: x[0] + 3 * x[1]},
    {"type": "ineq", "fun": lambda x: 18 - x[0] - 3 * x[1]},
    {"type": "ineq", "fun": lambda x: x[0] + x[1]},
    {"type": "ineq", "fun": lambda x: 8 - x[0] - x[1]},
]


def grid_then_refine(f, bounds, density, keep=20, constraints=None):
    axes = [np.linspace(lo, hi, density) for lo, hi in bounds]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(bounds), -1).T
    if constraints:
        ok = np.all([[c["fun"](p) >= 0 for c in constraints] for p in pts], axis=1)
        pts = pts[ok]
    vals = np.array([f(p) for p in pts])
    best_x, best_v = None, math.inf
    for idx in np.argsort(vals)[:keep]:
        if constraints:
            res = minimize(f, pts[idx], method="SLSQP", bounds=bounds, constraints=constraints,
                           options={"ftol": 1e-15, "maxiter": 500})
        else:
            res = minimize(f, pts[idx], method="L-BFGS-B", bounds=bounds,
                           options={"ftol": 1e-15, "gtol": 1e-12})
        for x, v in ((res.x, f(res.x)), (pts[idx], vals[idx])):
            if v < best_v:
                best_x, best_v = np.asarray(x), v
    return best_x, best_v


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--density", type=int, default=2001, help="grid points per axis in 1D")
    args = parser.parse_args()
    n1 = args.density
    n2 = max(50, int(round(math.sqrt(n1) * 10)))
    n3 = max(20, int(round(n1 ** (1 / 3) * 8)))

    jobs = [
        ("bumpy", bumpy, [(-10, 10)], n1 * 10),
        ("multimodal", multimodal, [(-2.7, 7.5)], n1 * 10),
        ("ackley", ackley, [(-32, 16), (-32, 16)], n2),
        ("branin", branin, [(-5, 10), (0, 15)], n2),
        ("rosenbrock", rosenbrock, [(-2, 2), (-1, 3)], n2),
        ("hartmann", hartmann, [(0, 1)] * 3, n3),
    ]
    for name, f, bounds, density in jobs:
        x, v = grid_then_refine(f, bounds, density)
        print(f"{name:12s} min={float(v)!r} argmin={[float(e) for e in x]}")

    xs, total = [], 0.0
    for i in range(5):
        grid = np.linspace(0, math.pi, n1 * 10)
        start = grid[int(np.argmin([michalewicz_term(i, g) for g in grid]))]
        step = math.pi / (n1 * 10 - 1)
        res = minimize_scalar(lambda v: michalewicz_term(i, v), bounds=(max(0, start - step), min(math.pi, start + step)),
                              method="bounded", options={"xatol": 1e-14})
        xs.append(float(res.x))
        total += michalewicz_term(i, res.x)
    print(f"{'michalewicz':12s} min={float(total)!r} argmin={xs}")

    x, v = grid_then_refine(ks224, [(0, 6), (0, 6)], n2, constraints=KS224_CONSTRAINTS)
    print(f"{'ks224':12s} min={float(v)!r} argmin={[float(e) for e in x]}")


if __name__ == "__main__":
    main()
