#!/usr/bin/env python3
"""Mesh-refinement study against the closed-form Gaussian solution.

With V(x) = 2|x|^2 the equation -Δu + V u = u log u^2 has the exact solution
u*(x) = e^N exp(-|x|^2) with energy (1/2) e^2 sqrt(pi/2) in 1d and
(1/2) e^4 (pi/2) in 2d.  This script runs the full continuation solve at a
ladder of resolutions and prints the L2 field error and energy error per
level, plus the observed convergence order between consecutive levels
(expect ~2 for the centred second-order stencil once truncation error from
the finite box stops dominating).

Usage:
    python3 scripts/gausson_convergence.py
    python3 scripts/gausson_convergence.py --dim 2 --points 46 94 190 --half-width 6
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from lse.energy import Harmonic, PerturbationParams
from lse.grid import make_grid
from lse.solver import ContinuationSchedule, MountainPassConfig, continue_to_limit


def exact_energy(dim: int) -> float:
    return 0.5 * math.e ** (2 * dim) * (math.pi / 2.0) ** (dim / 2.0)


def solve_level(dim: int, half_width: float, points: int, tol: float):
    g = make_grid(dim, half_width, points)
    sched = ContinuationSchedule(lambda_start=1.0, ratio=0.1, lambda_min=1e-4)
    params = PerturbationParams(lam=1.0, p=1.5)
    cfg = MountainPassConfig(descent_tol=tol, max_outer=500)
    start = time.perf_counter()
    u, report = continue_to_limit(g, Harmonic(2.0), sched, params, cfg)
    elapsed = time.perf_counter() - start
    star = np.exp(float(dim)) * np.exp(-g.radius_squared().ravel())
    rel_l2 = float(np.linalg.norm(u.values - star) / np.linalg.norm(star))
    energy = report.records[-1].energy
    return g.spacing, rel_l2, energy, elapsed


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dim", type=int, default=1, choices=(1, 2))
    parser.add_argument("--half-width", type=float, default=8.0)
    parser.add_argument(
        "--points",
        type=int,
        nargs="+",
        default=[126, 254, 510, 1022],
        help="interior points per axis, one entry per refinement level",
    )
    parser.add_argument("--tol", type=float, default=1e-6, help="descent tolerance")
    args = parser.parse_args()

    e_star = exact_energy(args.dim)
    print(f"# dim={args.dim} half_width={args.half_width} exact energy={e_star:.10f}")
    print(f"{'n':>6} {'h':>10} {'rel_l2_err':>12} {'energy':>16} {'energy_err':>12} {'order':>7} {'secs':>7}")

    prev = None
    for n in args.points:
        h, rel_l2, energy, elapsed = solve_level(args.dim, args.half_width, n, args.tol)
        e_err = abs(energy - e_star)
        if prev is None:
            order = "-"
        else:
            h0, err0 = prev
            order = f"{math.log(err0 / rel_l2) / math.log(h0 / h):7.2f}" if rel_l2 > 0 else "-"
        print(f"{n:>6} {h:>10.6f} {rel_l2:>12.3e} {energy:>16.10f} {e_err:>12.3e} {order:>7} {elapsed:>7.2f}")
        prev = (h, rel_l2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
