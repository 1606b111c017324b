#!/usr/bin/env python3
"""Measure how the first-order Hessian-product bias scales with delta.

On a non-quadratic lower level, the central-difference products differ
from the exact second-order ones by a discretization bias. This script
sweeps delta on a (deterministic) log-cosh instance and reports the
error norm together with the fitted log-log slope (expected close to 2).

Usage:
    python3 scripts/fo_bias_scaling.py
"""

from __future__ import annotations

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gossipbo import hvp_fo, hvp_so, make_logcosh  # noqa: E402


def main() -> int:
    problem = make_logcosh(seed=3, n_nodes=4, d=3, p=5)
    rng = np.random.default_rng(11)
    x = rng.normal(size=problem.dim_x)
    y = rng.normal(size=problem.dim_y)
    z = rng.normal(size=problem.dim_y)
    exact = hvp_so(problem, 0, x, y, z, rng=rng)
    deltas = np.logspace(-1, -4, 7)
    errs = []
    print(f"{'delta':>10s}  {'|p_h error|':>12s}  {'|p_j error|':>12s}")
    for delta in deltas:
        fo = hvp_fo(problem, 0, x, y, z, float(delta), rng=rng)
        eh = float(np.linalg.norm(fo.p_h - exact.p_h))
        ej = float(np.linalg.norm(fo.p_j - exact.p_j))
        errs.append(eh)
        print(f"{delta:10.2e}  {eh:12.4e}  {ej:12.4e}")

    slope = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    print(f"\nfitted log-log slope of |p_h error| vs delta: {slope:.3f} (expect ~2)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
