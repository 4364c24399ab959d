"""Command-line front end for triplet verification, solves, and studies.

Subcommands
-----------
verify    check all algebraic conditions of a method triplet
solve     run one forward/adjoint sweep and report cost and errors
converge  grid-refinement study with experimental orders (CSV/JSON)
optimize  box-constrained control optimization, summary as JSON

Exit codes: 0 success, 1 numerical failure, 2 usage error.  All flags can
also be given in a flat INI-style config file (section ``[peerctrl]``,
keys equal to the long flag names); command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time

import numpy as np

from .catalog import CatalogError, TRIPLET_NAMES, load_triplet
from .conditions import DEFAULT_TOL, verify_triplet
from .convergence import records_to_csv, records_to_json, run_study
from .gradient import evaluate
from .optimize import OptimizeConfig, minimize
from .problems import make_problem
from .sweeps import Grid, PeerSolver, StepFailure, control_mask

__all__ = ["main", "build_parser"]

PROBLEM_NAMES = ("quadratic", "heat", "schlogl")


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--triplet", help=f"method name, one of {', '.join(TRIPLET_NAMES)}")
    p.add_argument("--problem", help=f"benchmark name, one of {', '.join(PROBLEM_NAMES)}")
    p.add_argument("--nsteps", type=int, help="number of time steps (N+1)")
    p.add_argument("--m", type=int, help="spatial resolution of the benchmark")
    p.add_argument("--out", help="output file path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="serialization format for tabular output")
    p.add_argument("--tol", type=float, help="verification tolerance override")
    p.add_argument("--max-iters", type=int, help="optimizer iteration cap")
    p.add_argument("--grad-tol", type=float, help="optimizer stationarity tolerance")
    p.add_argument("--init", default="zero",
                   help="initial control: zero | ustop | file:<path>")
    p.add_argument("--lo", type=float, help="lower box bound on the control")
    p.add_argument("--hi", type=float, help="upper box bound on the control")
    p.add_argument("--config", help="INI-style config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peerctrl",
        description="Implicit two-step peer triplets for ODE-constrained optimal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="check the algebraic conditions of a triplet")
    _add_shared_flags(p_verify)

    p_solve = sub.add_parser("solve", help="single forward/adjoint sweep")
    _add_shared_flags(p_solve)

    p_conv = sub.add_parser("converge", help="grid refinement study")
    _add_shared_flags(p_conv)
    p_conv.add_argument("--grids", help="comma-separated list of step counts",
                        default=None)
    p_conv.add_argument("--mode", choices=("exact", "optimized"), default="optimized")

    p_opt = sub.add_parser("optimize", help="optimize the discrete control")
    _add_shared_flags(p_opt)
    return parser


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill unset flags from the INI file named by --config."""
    if not args.config:
        return
    cp = configparser.ConfigParser()
    read = cp.read(args.config)
    if not read:
        parser.error(f"config file not found: {args.config}")
    section = cp["peerctrl"] if cp.has_section("peerctrl") else cp["DEFAULT"]
    casts = {
        "nsteps": int, "m": int, "tol": float, "max_iters": float,
        "max-iters": float, "grad_tol": float, "grad-tol": float,
        "lo": float, "hi": float,
    }
    for key, value in section.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            parser.error(f"unknown config key: {key}")
        if getattr(args, attr) in (None, "zero") or (
            attr == "format" and args.format == "csv"
        ):
            cast = casts.get(key, str)
            try:
                setattr(args, attr, cast(value))
            except ValueError:
                parser.error(f"bad value for config key {key}: {value!r}")
    if isinstance(getattr(args, "max_iters", None), float):
        args.max_iters = int(args.max_iters)


def _load_triplet_or_exit(name, parser):
    if not name:
        parser.error("--triplet is required")
    try:
        return load_triplet(name)
    except CatalogError:
        parser.error(f"unknown triplet {name!r}; known: {', '.join(TRIPLET_NAMES)}")


def _make_problem_or_exit(args, parser):
    if not args.problem:
        parser.error("--problem is required")
    lo = -np.inf if args.lo is None else args.lo
    hi = np.inf if args.hi is None else args.hi
    try:
        return make_problem(args.problem, m=args.m, lo=lo, hi=hi)
    except KeyError:
        parser.error(f"unknown problem {args.problem!r}; known: {', '.join(PROBLEM_NAMES)}")


def _initial_control(args, problem, triplet, grid, parser):
    shape = (grid.n_steps, triplet.s, problem.d)
    spec = args.init or "zero"
    if spec == "zero":
        return np.zeros(shape)
    if spec == "ustop":
        if not hasattr(problem, "u_stop"):
            parser.error(f"problem {args.problem!r} has no built-in stopping control")
        if hasattr(problem, "align_target"):
            problem.align_target(triplet, grid)  # u_stop depends on the target
        times = grid.stage_times(triplet)
        mask = control_mask(triplet, grid)
        U = np.zeros(shape)
        for n in range(grid.n_steps):
            for i in range(triplet.s):
                if mask[n, i]:
                    U[n, i] = problem.u_stop(times[n, i])
        return U
    if spec.startswith("file:"):
        path = spec[len("file:"):]
        try:
            U = np.load(path) if path.endswith(".npy") else np.loadtxt(path, delimiter=",")
        except OSError:
            parser.error(f"cannot read initial control from {path}")
        U = np.asarray(U, dtype=float).reshape(shape)
        return U
    parser.error(f"bad --init value {spec!r}; use zero | ustop | file:<path>")


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _cmd_verify(args, parser) -> int:
    triplet = _load_triplet_or_exit(args.triplet, parser)
    tol = DEFAULT_TOL if args.tol is None else args.tol
    report = verify_triplet(triplet, tol=tol)
    _emit(json.dumps(report.to_jsonable(), indent=2), args.out)
    return 0 if report.ok else 1


def _cmd_solve(args, parser) -> int:
    triplet = _load_triplet_or_exit(args.triplet, parser)
    problem = _make_problem_or_exit(args, parser)
    if not args.nsteps or args.nsteps < 2:
        parser.error("--nsteps must be at least 2")
    grid = Grid(args.nsteps, problem.T)
    U = _initial_control(args, problem, triplet, grid, parser)
    try:
        res = evaluate(problem, triplet, grid, U)
    except (StepFailure, FloatingPointError) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1
    summary = {
        "triplet": triplet.name,
        "problem": args.problem,
        "Nplus1": grid.n_steps,
        "cost": res.cost,
        "state_norm": res.y_norm,
        "adjoint_norm": res.p_norm,
        "gradient_norm": float(np.max(np.abs(res.grad))),
    }
    _emit(json.dumps(summary, indent=2), args.out)
    return 0


def _cmd_converge(args, parser) -> int:
    triplet = _load_triplet_or_exit(args.triplet, parser)
    problem = _make_problem_or_exit(args, parser)
    if not hasattr(problem, "exact_solution") and not hasattr(problem, "exact_adjoint"):
        parser.error(f"problem {args.problem!r} has no analytic reference for a study")
    if args.grids:
        try:
            grids = [int(tok) for tok in args.grids.split(",")]
        except ValueError:
            parser.error(f"bad --grids list: {args.grids!r}")
    elif args.nsteps:
        grids = [args.nsteps * 2**k for k in range(4)]
    else:
        parser.error("either --grids or --nsteps is required")
    cfg = OptimizeConfig()
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    if args.grad_tol is not None:
        cfg.grad_tol = args.grad_tol
    try:
        records = run_study(problem, triplet, grids, mode=args.mode, cfg=cfg)
    except (StepFailure, FloatingPointError) as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return 1
    text = records_to_csv(records) if args.format == "csv" else records_to_json(records)
    _emit(text, args.out)
    return 0


def _cmd_optimize(args, parser) -> int:
    triplet = _load_triplet_or_exit(args.triplet, parser)
    problem = _make_problem_or_exit(args, parser)
    if not args.nsteps or args.nsteps < 2:
        parser.error("--nsteps must be at least 2")
    grid = Grid(args.nsteps, problem.T)
    U0 = _initial_control(args, problem, triplet, grid, parser)
    cfg = OptimizeConfig()
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    if args.grad_tol is not None:
        cfg.grad_tol = args.grad_tol
    start = time.perf_counter()
    try:
        U_opt, result = minimize(problem, triplet, grid, U0, cfg)
    except (StepFailure, FloatingPointError) as exc:
        print(f"optimization failed: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - start
    summary = {
        "triplet": triplet.name,
        "problem": args.problem,
        "Nplus1": grid.n_steps,
        "cost": result.cost,
        "iterations": result.iterations,
        "converged": result.converged,
        "gradient_norm": result.grad_norm,
        "message": result.message,
        "wall_seconds": wall,
    }
    _emit(json.dumps(summary, indent=2), args.out)
    return 0 if result.converged else 1


_COMMANDS = {
    "verify": _cmd_verify,
    "solve": _cmd_solve,
    "converge": _cmd_converge,
    "optimize": _cmd_optimize,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config(args, parser)
    return _COMMANDS[args.command](args, parser)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
