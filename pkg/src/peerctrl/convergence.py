"""Grid-refinement studies with experimental orders of convergence.

A study runs the discrete solver on a list of step counts and measures
errors against the analytic reference of the chosen problem.  Two modes
are supported: ``exact`` feeds the analytic optimal control into the
sweeps (isolating the discretization error of the schemes), ``optimized``
runs the box-constrained minimizer per grid and measures the errors of
the computed optimum.

Error conventions depend on the reference available:

* problems with a pointwise reference (``exact_solution``) report the
  maximal stage errors of the first state and adjoint components,
* problems with endpoint references (``exact_terminal_state`` and
  ``exact_adjoint``) report ``max|y(T) - y_h(T)|`` and
  ``max|p(0) - p_h(0)|`` over the physical components.

Control errors are always maximal stage errors; ``errUpp`` refers to the
postprocessed control recovered from the state/adjoint stage values at
every node, including stages that carry no control unknown.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .catalog import PeerTriplet
from .gradient import evaluate, postprocess_control
from .optimize import OptimizeConfig, minimize
from .sweeps import Grid, PeerSolver, control_mask

__all__ = [
    "ConvergenceRecord",
    "CSV_COLUMNS",
    "run_study",
    "records_to_csv",
    "records_to_json",
]

CSV_COLUMNS = [
    "triplet",
    "problem",
    "Nplus1",
    "errU",
    "errUpp",
    "errY",
    "errP",
    "eocU",
    "eocUpp",
    "eocY",
    "eocP",
]


@dataclass
class ConvergenceRecord:
    """One grid of a refinement study: error norms and observed orders.

    Orders compare against the previous (coarser) record and are ``None``
    on the first row.
    """

    triplet: str
    problem: str
    nplus1: int
    err_u: float
    err_upp: float
    err_y: float
    err_p: float
    eoc_u: float | None = None
    eoc_upp: float | None = None
    eoc_y: float | None = None
    eoc_p: float | None = None

    def row(self) -> list:
        def fmt(v):
            return "" if v is None else f"{v:.6g}"

        return [
            self.triplet,
            self.problem,
            str(self.nplus1),
            f"{self.err_u:.10e}",
            f"{self.err_upp:.10e}",
            f"{self.err_y:.10e}",
            f"{self.err_p:.10e}",
            fmt(self.eoc_u),
            fmt(self.eoc_upp),
            fmt(self.eoc_y),
            fmt(self.eoc_p),
        ]

    def to_jsonable(self) -> dict:
        return dict(zip(CSV_COLUMNS, [
            self.triplet, self.problem, self.nplus1,
            self.err_u, self.err_upp, self.err_y, self.err_p,
            self.eoc_u, self.eoc_upp, self.eoc_y, self.eoc_p,
        ]))


def _eoc(coarse: float, fine: float, ratio: float) -> float | None:
    """log(e_coarse/e_fine) / log(ratio); None when undefined."""
    if coarse <= 0.0 or fine <= 0.0 or ratio <= 1.0:
        return None
    return math.log(coarse / fine) / math.log(ratio)


def _exact_stage_control(problem, triplet, grid):
    """Stage-control array filled with the analytic control at active nodes."""
    times = grid.stage_times(triplet)
    mask = control_mask(triplet, grid)
    U = np.zeros((grid.n_steps, triplet.s, problem.d))
    for n in range(grid.n_steps):
        for i in range(triplet.s):
            if mask[n, i]:
                U[n, i] = _reference_control(problem, times[n, i])
    return U


def _reference_control(problem, t):
    if hasattr(problem, "exact_solution"):
        return np.atleast_1d(problem.exact_solution(t)[1])
    return np.atleast_1d(problem.exact_control(t))


def _errors(problem, triplet, grid, traj):
    """(errU, errUpp, errY, errP) against the problem's analytic reference."""
    times = grid.stage_times(triplet)
    mask = control_mask(triplet, grid)
    Upp = postprocess_control(problem, triplet, grid, traj.Y, traj.P)

    err_u = 0.0
    err_upp = 0.0
    for n in range(grid.n_steps):
        for i in range(triplet.s):
            u_ref = _reference_control(problem, times[n, i])
            err_upp = max(err_upp, float(np.max(np.abs(Upp[n, i] - u_ref))))
            if mask[n, i]:
                err_u = max(err_u, float(np.max(np.abs(traj.U[n, i] - u_ref))))

    if hasattr(problem, "exact_solution"):
        err_y = 0.0
        err_p = 0.0
        for n in range(grid.n_steps):
            for i in range(triplet.s):
                y_ref, _, p_ref = problem.exact_solution(times[n, i])
                err_y = max(err_y, abs(float(traj.Y[n, i, 0]) - y_ref))
                err_p = max(err_p, abs(float(traj.P[n, i, 0]) - p_ref))
    else:
        y_ref = problem.exact_terminal_state()
        err_y = float(np.max(np.abs(traj.y_terminal[:-1] - y_ref[:-1])))
        p_ref = problem.exact_adjoint(0.0)
        err_p = float(np.max(np.abs(traj.p_initial[: p_ref.size] - p_ref)))
    return err_u, err_upp, err_y, err_p


def run_study(
    problem,
    triplet: PeerTriplet,
    n_steps_list,
    mode: str = "optimized",
    cfg: OptimizeConfig | None = None,
) -> list[ConvergenceRecord]:
    """Run a refinement study and return one record per grid.

    ``mode='exact'`` solves the sweeps with the analytic control;
    ``mode='optimized'`` minimizes from a zero initial guess per grid.
    Records are ordered by grid size with orders relative to the
    previous grid at the exact refinement ratio.
    """
    if mode not in ("exact", "optimized"):
        raise ValueError(f"unknown study mode: {mode!r}")
    if not (hasattr(problem, "exact_solution") or hasattr(problem, "exact_adjoint")):
        raise ValueError("convergence study requires a problem with an analytic reference")
    if cfg is None:
        # studies measure discretization orders, so the discrete optimum must
        # be located well below the finest grid's error level
        cfg = OptimizeConfig(polish=True)

    records: list[ConvergenceRecord] = []
    prev = None
    for n_steps in sorted(int(n) for n in n_steps_list):
        grid = Grid(n_steps, problem.T)
        if mode == "exact":
            solver = PeerSolver(problem, triplet, grid)
            traj = solver.solve(_exact_stage_control(problem, triplet, grid))
        else:
            U0 = np.zeros((grid.n_steps, triplet.s, problem.d))
            U_opt, _ = minimize(problem, triplet, grid, U0, cfg)
            traj = evaluate(problem, triplet, grid, U_opt).trajectory
        err_u, err_upp, err_y, err_p = _errors(problem, triplet, grid, traj)
        rec = ConvergenceRecord(
            triplet.name, getattr(problem, "name", type(problem).__name__), n_steps,
            err_u, err_upp, err_y, err_p,
        )
        if prev is not None:
            ratio = n_steps / prev.nplus1
            rec.eoc_u = _eoc(prev.err_u, err_u, ratio)
            rec.eoc_upp = _eoc(prev.err_upp, err_upp, ratio)
            rec.eoc_y = _eoc(prev.err_y, err_y, ratio)
            rec.eoc_p = _eoc(prev.err_p, err_p, ratio)
        records.append(rec)
        prev = rec
    return records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def records_to_json(records) -> str:
    return json.dumps([rec.to_jsonable() for rec in records], indent=2)
