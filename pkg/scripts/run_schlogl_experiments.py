#!/usr/bin/env python3
"""Distributed-control experiments on the reaction-diffusion benchmark.

Reproduces, per triplet and grid:
  * the forward simulation with the analytic stopping control,
  * the optimized cost starting from that control,
  * optionally the box-constrained run (bounds [-0.5, 0]).

Results go to a JSON file in the output directory (default ./results).
Wall times are reported for information only; they depend on hardware and
optimizer and are never asserted anywhere.
"""

import argparse
import json
import pathlib
import time

import numpy as np

from peerctrl.catalog import load_triplet
from peerctrl.optimize import OptimizeConfig, minimize
from peerctrl.problems import make_problem
from peerctrl.sweeps import Grid, PeerSolver, control_mask

DEFAULT_RUNS = (
    ("AP4o43p", 50), ("AP4o43p", 100), ("AP4o43p", 200), ("AP4o43p", 400),
    ("AP4o33pa", 50), ("AP4o33pa", 400),
    ("AP4o33pfs", 50), ("AP4o33pfs", 400),
)


def stopping_control(problem, triplet, grid, lo=None, hi=None):
    PeerSolver(problem, triplet, grid)  # aligns the tracking target
    mask = control_mask(triplet, grid)
    times = grid.stage_times(triplet)
    U = np.zeros((grid.n_steps, triplet.s, problem.d))
    for n in range(grid.n_steps):
        for i in range(triplet.s):
            if mask[n, i]:
                u = problem.u_stop(times[n, i])
                U[n, i] = u if lo is None else np.clip(u, lo, hi)
    return U


def run_one(name, n_plus_1, m, max_iters):
    triplet = load_triplet(name)
    problem = make_problem("schlogl", m=m)
    grid = Grid(n_plus_1, problem.T)
    solver = PeerSolver(problem, triplet, grid)
    U0 = stopping_control(problem, triplet, grid)
    forward_cost = problem.cost(solver.solve(U0, with_adjoint=False).y_terminal)
    start = time.perf_counter()
    _, result = minimize(problem, triplet, grid, U0,
                         OptimizeConfig(max_iters=max_iters, grad_tol=1e-9))
    wall = time.perf_counter() - start
    entry = dict(triplet=name, Nplus1=n_plus_1, m=m,
                 forward_cost=forward_cost, optimized_cost=result.cost,
                 iterations=result.iterations, wall_seconds=round(wall, 1))
    print(f"{name:10s} N+1={n_plus_1:3d}  forward={forward_cost:.4e}  "
          f"optimized={result.cost:.4e}  ({wall:.0f}s)")
    return entry


def run_box(m, max_iters):
    triplet = load_triplet("AP4o43p")
    problem = make_problem("schlogl", m=m, lo=-0.5, hi=0.0)
    grid = Grid(50, problem.T)
    solver = PeerSolver(problem, triplet, grid)
    U0 = stopping_control(problem, triplet, grid, lo=-0.5, hi=0.0)
    baseline = problem.cost(solver.solve(U0, with_adjoint=False).y_terminal)
    _, result = minimize(problem, triplet, grid, U0,
                         OptimizeConfig(max_iters=max_iters, grad_tol=1e-9))
    print(f"box [-0.5, 0]: clipped baseline={baseline:.4e}  "
          f"optimized={result.cost:.4e}")
    return dict(run="box", bounds=[-0.5, 0.0], Nplus1=50, m=m,
                clipped_baseline=baseline, optimized_cost=result.cost)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=300)
    ap.add_argument("--max-iters", type=int, default=60)
    ap.add_argument("--skip-box", action="store_true")
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = [run_one(name, n, args.m, args.max_iters) for name, n in DEFAULT_RUNS]
    if not args.skip_box:
        entries.append(run_box(args.m, max(args.max_iters, 80)))
    path = outdir / f"schlogl_m{args.m}.json"
    path.write_text(json.dumps(entries, indent=2))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
