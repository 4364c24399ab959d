"""Box-constrained minimization of the reduced objective.

Projected gradient with Armijo backtracking, accelerated by a limited-memory
quasi-Newton (L-BFGS two-loop) model on the currently inactive variables.
The quasi-Newton history is discarded whenever the active set changes, which
keeps curvature pairs consistent with the subspace they were collected on.
An optional preconditioner (e.g. sparse control-Hessian blocks) can rescale
the gradient before the two-loop recursion.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .catalog import PeerTriplet
from .gradient import evaluate
from .sweeps import Grid, PeerSolver, StepFailure, control_mask

__all__ = ["OptimizeConfig", "OptimizeResult", "minimize_box", "minimize"]


@dataclass
class OptimizeConfig:
    max_iters: int = 500
    grad_tol: float = 1e-10
    memory: int = 10  # 0 = pure projected gradient
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    polish: bool = False  # Newton-CG refinement for quadratic reduced costs
    polish_tol: float = 1e-12


@dataclass
class OptimizeResult:
    x: np.ndarray
    cost: float
    converged: bool
    iterations: int
    grad_norm: float
    history: list = field(default_factory=list)  # (iter, cost, pg-norm, step)
    message: str = ""


def _project(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def _polish_newton_cg(fun_grad, x, f, g, cfg: OptimizeConfig):
    """Refine an unconstrained minimizer of a quadratic reduced cost.

    First-order line searches stall once cost differences drop into
    roundoff, well before the control itself is tight.  For a quadratic
    objective the gradient is affine, so Hessian-vector products are exact
    gradient differences and a few Newton-CG steps drive the gradient to
    machine precision.  Steps that fail to reduce the gradient norm are
    rejected, which keeps the refinement safe on mildly non-quadratic
    objectives.
    """
    from scipy.sparse.linalg import LinearOperator, cg

    for _ in range(3):
        g_norm = float(np.max(np.abs(g)))
        if g_norm <= cfg.polish_tol:
            break

        def hessvec(v):
            return fun_grad(x + v)[1] - g

        op = LinearOperator((x.size, x.size), matvec=hessvec)
        d, _ = cg(op, -g, rtol=1e-8, atol=0.0, maxiter=min(300, 2 * x.size))
        f_new, g_new = fun_grad(x + d)
        if float(np.max(np.abs(g_new))) >= g_norm:
            break
        x, f, g = x + d, f_new, g_new
    return x, f, g


def minimize_box(
    fun_grad, x0, lo, hi, cfg: OptimizeConfig | None = None, precondition=None, fun=None
):
    """Minimize f(x) subject to lo <= x <= hi.

    ``fun_grad(x) -> (f, g)``; ``fun(x) -> f`` (optional) is a cheaper
    cost-only evaluation used during backtracking; ``precondition(g)`` is
    applied as the initial Hessian guess of the two-loop recursion.
    """
    cfg = cfg or OptimizeConfig()
    if fun is None:
        fun = lambda x: fun_grad(x)[0]
    unconstrained = bool(np.all(np.isneginf(lo)) and np.all(np.isposinf(hi)))

    def finish(x, f, g, converged, it, history, message):
        if cfg.polish and unconstrained:
            x, f, g = _polish_newton_cg(fun_grad, x, f, g, cfg)
            pg_norm = float(np.max(np.abs(g))) if g.size else 0.0
            converged = converged or pg_norm <= cfg.polish_tol
            message += " + newton-cg polish"
        else:
            pg = x - _project(x - g, lo, hi)
            pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        return OptimizeResult(x, float(f), converged, it, pg_norm, history, message)

    x = _project(np.asarray(x0, dtype=float), lo, hi)
    f, g = fun_grad(x)
    s_hist: deque = deque(maxlen=max(cfg.memory, 1))
    y_hist: deque = deque(maxlen=max(cfg.memory, 1))
    history = []
    active = None
    step = 1.0
    grad_step = 1.0  # adapted trial step for plain gradient directions
    stalled = 0

    with np.errstate(invalid="ignore"):
        lo_edge = np.where(np.isfinite(lo), lo + 1e-14 * (1.0 + np.abs(lo)), -np.inf)
        hi_edge = np.where(np.isfinite(hi), hi - 1e-14 * (1.0 + np.abs(hi)), np.inf)

    for it in range(cfg.max_iters):
        pg = x - _project(x - g, lo, hi)
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        history.append((it, float(f), pg_norm, step))
        if pg_norm <= cfg.grad_tol:
            return finish(x, f, g, True, it, history, "stationary")

        new_active = ((x <= lo_edge) & (g > 0)) | ((x >= hi_edge) & (g < 0))
        if active is None or not np.array_equal(new_active, active):
            s_hist.clear()
            y_hist.clear()
        active = new_active
        free = ~active

        # search direction: L-BFGS two-loop on the free variables
        d = np.where(free, g, 0.0)
        quasi_newton = False
        if cfg.memory > 0 and s_hist:
            q = d.copy()
            alphas = []
            for s, y in zip(reversed(s_hist), reversed(y_hist)):
                rho = 1.0 / (y @ s)
                a = rho * (s @ q)
                alphas.append((a, rho, s, y))
                q -= a * y
            if precondition is not None:
                q = precondition(q)
            else:
                s_l, y_l = s_hist[-1], y_hist[-1]
                q *= (s_l @ y_l) / (y_l @ y_l)
            for a, rho, s, y in reversed(alphas):
                b = rho * (y @ q)
                q += (a - b) * s
            d = np.where(free, q, 0.0)
            quasi_newton = True
            if d @ g <= 0:  # not a descent direction, fall back
                d = np.where(free, g, 0.0)
                quasi_newton = False
        elif precondition is not None:
            d = np.where(free, precondition(d), 0.0)
            quasi_newton = True

        # Armijo backtracking along the projected path (cost-only trials);
        # a trial is accepted only once its gradient also evaluates cleanly
        step = 1.0 if quasi_newton else grad_step
        accepted = None
        for _ in range(cfg.max_backtracks):
            x_trial = _project(x - step * d, lo, hi)
            slope = g @ (x - x_trial)
            f_trial = fun(x_trial)
            if f_trial <= f - cfg.armijo * max(slope, 0.0) and f_trial < f + 1e-16 * (
                1 + abs(f)
            ):
                try:
                    f_new, g_new = fun_grad(x_trial)
                except (StepFailure, FloatingPointError, ValueError):
                    f_new, g_new = np.inf, None
                if g_new is not None and np.isfinite(f_new) and np.all(np.isfinite(g_new)):
                    accepted = (x_trial, f_new, g_new)
                    break
            step *= cfg.backtrack
        if accepted is None:
            return finish(x, f, g, False, it, history, "line search failed")
        if not quasi_newton:
            grad_step = 2.0 * step
        x_new, f_new, g_new = accepted
        if f - f_new <= 1e-14 * (1.0 + abs(f)):
            stalled += 1
            if stalled >= 5:
                return finish(
                    x_new, f_new, g_new, True, it + 1, history,
                    "progress stalled at numerical precision",
                )
        else:
            stalled = 0
        if cfg.memory > 0:
            s_vec = x_new - x
            y_vec = g_new - g
            if (s_vec @ y_vec) > 1e-14 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
                s_hist.append(s_vec)
                y_hist.append(y_vec)
        x, f, g = x_new, f_new, g_new

    pg = x - _project(x - g, lo, hi)
    pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
    return finish(x, f, g, pg_norm <= cfg.grad_tol, cfg.max_iters, history, "max iterations")


def minimize(
    problem,
    triplet: PeerTriplet,
    grid: Grid,
    U0: np.ndarray,
    cfg: OptimizeConfig | None = None,
) -> tuple[np.ndarray, OptimizeResult]:
    """Optimize the stage controls of a discretized control problem.

    Packs only the active (non-blind) stage controls into the flat decision
    vector, runs the box-constrained minimizer, and unpacks the result.
    Returns the optimal stage-control array and the optimizer diagnostics.
    """
    solver = PeerSolver(problem, triplet, grid)
    active = control_mask(triplet, grid)
    d = problem.d
    idx = np.where(active.ravel())[0]

    def pack(U):
        return U.reshape(-1, d)[idx].ravel()

    def unpack(x):
        U = np.zeros((grid.n_steps, triplet.s, d))
        U.reshape(-1, d)[idx] = x.reshape(-1, d)
        return U

    def fun_grad(x):
        with np.errstate(over="ignore", invalid="ignore"):
            res = evaluate(problem, triplet, grid, unpack(x), solver=solver)
        return res.cost, pack(res.grad)

    def fun(x):
        # runaway trial points are rejected by the line search via +inf
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                traj = solver.solve(unpack(x), with_adjoint=False)
        except StepFailure:
            return np.inf
        cost = problem.cost(traj.y_terminal)
        return cost if np.isfinite(cost) else np.inf

    lo = np.full(idx.size * d, -np.inf) if np.isscalar(problem.lo) and np.isneginf(
        problem.lo
    ) else np.broadcast_to(np.asarray(problem.lo, dtype=float), (idx.size, d)).ravel().copy()
    hi = np.full(idx.size * d, np.inf) if np.isscalar(problem.hi) and np.isposinf(
        problem.hi
    ) else np.broadcast_to(np.asarray(problem.hi, dtype=float), (idx.size, d)).ravel().copy()

    result = minimize_box(fun_grad, pack(U0), lo, hi, cfg, fun=fun)
    return unpack(result.x), result
