"""Forward state sweep and backward adjoint sweep for Peer triplets.

The forward sweep solves the nonlinear two-step stage equations

    A_0 Y_0 = a (x) y0 + h K_0 F(Y_0, U_0),
    A_n Y_n = B_n Y_{n-1} + h K_n F(Y_n, U_n),   1 <= n <= N,

and the adjoint sweep the linear backward equations

    A_N^T P_N = w (x) p_h(T) + h (grad F)^T K_N^T P_N,
    A_n^T P_n = B_{n+1}^T P_{n+1} + h (grad F)^T K_n^T P_n,   n = N-1..0,

with p_h(T) the cost gradient at y_h(T) = (w^T (x) I) Y_N.

Interior steps have lower triangular A and diagonal K and are solved
stage-by-stage; the first and last steps have full coefficient matrices and
are solved as coupled (s*m)-dimensional systems.  Stage Jacobian
factorizations are cached and reused: exactly for problems with constant
state Jacobian, and as frozen approximations (with iterative refinement /
modified Newton) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .catalog import PeerTriplet

__all__ = ["Grid", "Trajectory", "PeerSolver", "StepFailure", "control_mask"]

#: boundary systems up to this state dimension are solved by dense LU;
#: larger ones fall back to block Gauss-Seidel over the stages
DENSE_COUPLED_LIMIT = 400

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 25
#: rebuild a frozen stage Jacobian if Newton has not converged after this many steps
REFRESH_AFTER = 4


class StepFailure(RuntimeError):
    """Nonlinear or linear stage solve failed at a specific time step."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class Grid:
    """Uniform time grid with N+1 steps of size h = T / (N+1)."""

    n_steps: int  # N + 1
    horizon: float

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("need at least two steps (separate start and end methods)")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def N(self) -> int:
        return self.n_steps - 1

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    def t(self, n: int) -> float:
        return n * self.h

    def stage_times(self, triplet: PeerTriplet) -> np.ndarray:
        """All stage times t_{ni} = n h + c_i h as an (N+1, s) array."""
        n = np.arange(self.n_steps)[:, None]
        return (n + triplet.c[None, :]) * self.h


def control_mask(triplet: PeerTriplet, grid: Grid) -> np.ndarray:
    """Boolean (N+1, s) mask of stages that carry a control unknown.

    Stage i of step n is active iff column i of K_n is nonzero; blind
    columns carry neither a control unknown nor an f evaluation.
    """
    mask = np.empty((grid.n_steps, triplet.s), dtype=bool)
    for n in range(grid.n_steps):
        Kn = triplet.step_matrices(n, grid.N)[2]
        mask[n] = np.any(Kn != 0.0, axis=0)
    return mask


@dataclass
class Trajectory:
    """Stage values of one forward/backward solve.

    ``Y`` has shape (N+1, s, m), ``P`` the same, and ``U`` is (N+1, s, d)
    with entries at blind stages kept at zero and never read.
    """

    Y: np.ndarray
    P: np.ndarray | None
    U: np.ndarray
    grid: Grid
    triplet: PeerTriplet

    @property
    def y_terminal(self) -> np.ndarray:
        """y_h(T) = (w^T (x) I) Y_N."""
        return np.einsum("i,im->m", self.triplet.w, self.Y[-1])

    @property
    def p_initial(self) -> np.ndarray:
        """p_h(0) = (v^T (x) I) P_0."""
        if self.P is None:
            raise ValueError("adjoint stages not populated")
        return np.einsum("i,im->m", self.triplet.v, self.P[0])


def _as_lu(matrix: np.ndarray):
    return sla.lu_factor(matrix)


class PeerSolver:
    """Runs forward and adjoint sweeps for one (problem, triplet, grid)."""

    def __init__(self, problem, triplet: PeerTriplet, grid: Grid):
        self.problem = problem
        self.triplet = triplet
        self.grid = grid
        self._stage_lu: dict = {}  # (kind, i) -> (lu, piv)
        self._coupled_lu: dict = {}  # kind -> factorization of the block system
        self._active = control_mask(triplet, grid)
        if hasattr(problem, "align_target"):
            problem.align_target(triplet, grid)

    # -- helpers -----------------------------------------------------------

    def _step_kind(self, n: int) -> str:
        if n == 0:
            return "start"
        if n == self.grid.N:
            return "end"
        return "standard"

    def _matrices(self, n: int):
        return self.triplet.step_matrices(n, self.grid.N)

    def _f(self, t: float, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = np.asarray(self.problem.f(t, y, u), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite f value at t={t}")
        return out

    def _jac(self, t, y, u) -> np.ndarray:
        return np.asarray(self.problem.jac_y(t, y, u), dtype=float)

    def _stage_matrix(self, aii: float, kappa: float, t, y, u) -> np.ndarray:
        m = self.problem.m
        return aii * np.eye(m) - self.grid.h * kappa * self._jac(t, y, u)

    def _stage_factor(self, key, aii, kappa, t, y, u, refresh=False):
        if refresh or key not in self._stage_lu:
            self._stage_lu[key] = _as_lu(self._stage_matrix(aii, kappa, t, y, u))
        return self._stage_lu[key]

    # -- stage solvers -----------------------------------------------------

    def _newton_stage(self, key, n, aii, kappa, t, u, b, y):
        """Solve aii*y - h*kappa*f(t,y,u) = b by (modified) Newton."""
        h = self.grid.h
        frozen = not getattr(self.problem, "jac_y_constant", False)
        for it in range(NEWTON_MAX_ITER):
            res = b + h * kappa * self._f(t, y, u) - aii * y
            if np.linalg.norm(res) <= NEWTON_TOL * (1.0 + np.linalg.norm(y)):
                return y
            refresh = frozen and (it == 0 or it % REFRESH_AFTER == 0) and it > 0
            lu = self._stage_factor(key, aii, kappa, t, y, u, refresh=refresh)
            if key not in self._stage_lu:  # pragma: no cover - defensive
                raise StepFailure("missing stage factorization", n)
            y = y + sla.lu_solve(lu, res)
        # last resort: exact Jacobian at the current iterate
        for _ in range(NEWTON_MAX_ITER):
            res = b + h * kappa * self._f(t, y, u) - aii * y
            if np.linalg.norm(res) <= NEWTON_TOL * (1.0 + np.linalg.norm(y)):
                return y
            M = self._stage_matrix(aii, kappa, t, y, u)
            y = y + np.linalg.solve(M, res)
        raise StepFailure("stage Newton iteration did not converge", n)

    def _linear_stage(self, key, n, aii, kappa, t, y_ref, u_ref, b):
        """Solve (aii*I - h*kappa*J(t, y_ref, u_ref))^T p = b for the adjoint."""
        h = self.grid.h
        lu = self._stage_factor(key, aii, kappa, t, y_ref, u_ref)
        x = sla.lu_solve(lu, b, trans=1)
        if getattr(self.problem, "jac_y_constant", False):
            return x
        # frozen factorization: refine against the exact transposed matrix
        J = self._jac(t, y_ref, u_ref)
        for _ in range(50):
            res = b - (aii * x - h * kappa * (J.T @ x))
            if np.linalg.norm(res) <= NEWTON_TOL * (1.0 + np.linalg.norm(x)):
                return x
            x = x + sla.lu_solve(lu, res, trans=1)
        M = aii * np.eye(self.problem.m) - h * kappa * J
        return np.linalg.solve(M.T, b)

    # -- coupled boundary steps ---------------------------------------------

    def _coupled_matrix(self, An, Kn, jacs):
        """Block matrix with (i,j) block A_ij I - h kappa_ij J_j."""
        s, m, h = self.triplet.s, self.problem.m, self.grid.h
        M = np.kron(An, np.eye(m))
        for i in range(s):
            for j in range(s):
                if Kn[i, j] != 0.0:
                    M[i * m:(i + 1) * m, j * m:(j + 1) * m] -= h * Kn[i, j] * jacs[j]
        return M

    def _coupled_factor(self, kind, An, Kn, jacs, refresh=False):
        if refresh or kind not in self._coupled_lu:
            M = self._coupled_matrix(An, Kn, jacs)
            if self.problem.m <= DENSE_COUPLED_LIMIT:
                self._coupled_lu[kind] = ("dense", _as_lu(M))
            else:
                self._coupled_lu[kind] = ("sparse", spla.splu(sp.csc_matrix(M)))
        return self._coupled_lu[kind]

    def _coupled_solve(self, fac, rhs, transpose=False):
        mode, lu = fac
        if mode == "dense":
            return sla.lu_solve(lu, rhs, trans=1 if transpose else 0)
        return lu.solve(rhs, trans="T" if transpose else "N")

    def _stage_jacs(self, n, Kn, tms, Y, U, for_columns=False):
        """Per-stage Jacobians, skipping stages whose f never enters.

        ``for_columns`` selects the adjoint convention: stage j is needed
        when column j (rather than row j) of K_n is nonzero.
        """
        s, m = self.triplet.s, self.problem.m
        jacs = [None] * s
        need = np.any(Kn != 0.0, axis=0) if for_columns else np.any(Kn != 0.0, axis=1)
        for j in range(s):
            jacs[j] = self._jac(tms[j], Y[j], U[j]) if need[j] else np.zeros((m, m))
        return jacs

    def _coupled_forward(self, n, An, Kn, rhs, Y_guess, U_n, tms):
        """Newton on the stacked boundary step system."""
        s, m, h = self.triplet.s, self.problem.m, self.grid.h
        kind = self._step_kind(n)
        frozen = not getattr(self.problem, "jac_y_constant", False)
        Y = Y_guess.copy()
        f_need = np.any(Kn != 0.0, axis=0)

        def residual(Yc):
            F = np.zeros((s, m))
            for j in range(s):
                if f_need[j]:
                    F[j] = self._f(tms[j], Yc[j], U_n[j])
            return (rhs + h * Kn @ F - An @ Yc).ravel()

        for it in range(NEWTON_MAX_ITER):
            res = residual(Y)
            if np.linalg.norm(res) <= NEWTON_TOL * (1.0 + np.linalg.norm(Y)):
                return Y
            refresh = frozen and it > 0 and it % REFRESH_AFTER == 0
            jacs = None
            if refresh or kind not in self._coupled_lu:
                jacs = self._stage_jacs(n, Kn, tms, Y, U_n)
            fac = self._coupled_factor(kind, An, Kn, jacs, refresh=refresh) \
                if jacs is not None else self._coupled_lu[kind]
            Y = Y + self._coupled_solve(fac, res).reshape(s, m)
        raise StepFailure("boundary step Newton iteration did not converge", n)

    def _coupled_adjoint(self, n, An, Kn, rhs, Y_n, U_n, tms):
        """Solve the linear coupled adjoint step (blockwise transpose)."""
        s, m, h = self.triplet.s, self.problem.m, self.grid.h
        kind = self._step_kind(n)
        jacs = self._stage_jacs(n, Kn, tms, Y_n, U_n)
        if kind not in self._coupled_lu:
            self._coupled_factor(kind, An, Kn, jacs)
        fac = self._coupled_lu[kind]
        b = rhs.ravel()
        x = self._coupled_solve(fac, b, transpose=True)

        def apply(xv):
            X = xv.reshape(s, m)
            out = np.einsum("ji,jm->im", An, X)
            for i in range(s):
                acc = np.zeros(m)
                for j in range(s):
                    if Kn[j, i] != 0.0:
                        acc += Kn[j, i] * X[j]
                out[i] -= h * (jacs[i].T @ acc)
            return out.ravel()

        for _ in range(50):
            res = b - apply(x)
            if np.linalg.norm(res) <= NEWTON_TOL * (1.0 + np.linalg.norm(x)):
                return x.reshape(s, m)
            x = x + self._coupled_solve(fac, res, transpose=True)
        # refinement stalled (frozen base point too far): rebuild exactly
        fac = self._coupled_factor(kind, An, Kn, jacs, refresh=True)
        return self._coupled_solve(fac, b, transpose=True).reshape(s, m)

    # -- sweeps --------------------------------------------------------------

    def forward(self, U: np.ndarray) -> np.ndarray:
        """March the state stages Y_n for n = 0..N under the given controls."""
        t, g = self.triplet, self.grid
        s, m, h = t.s, self.problem.m, g.h
        y0 = np.asarray(self.problem.y0, dtype=float)
        Y = np.zeros((g.n_steps, s, m))
        times = g.stage_times(t)
        for n in range(g.n_steps):
            An, Bn, Kn = self._matrices(n)
            rhs = np.outer(t.a, y0) if n == 0 else Bn @ Y[n - 1]
            guess = np.tile(y0, (s, 1)) if n == 0 else Y[n - 1]
            if self._step_kind(n) != "standard":
                Y[n] = self._coupled_forward(n, An, Kn, rhs, guess, U[n], times[n])
                continue
            for i in range(s):
                b = rhs[i] - An[i, :i] @ Y[n, :i]
                if Kn[i, i] == 0.0:
                    Y[n, i] = b / An[i, i]
                else:
                    Y[n, i] = self._newton_stage(
                        ("std", i), n, An[i, i], Kn[i, i], times[n, i], U[n, i], b, guess[i]
                    )
            if not np.all(np.isfinite(Y[n])):
                raise StepFailure("state stages overflowed", n)
        return Y

    def adjoint(self, Y: np.ndarray, U: np.ndarray) -> np.ndarray:
        """March the adjoint stages P_n backwards for n = N..0."""
        t, g = self.triplet, self.grid
        s, m, h = t.s, self.problem.m, g.h
        P = np.zeros((g.n_steps, s, m))
        times = g.stage_times(t)
        y_T = np.einsum("i,im->m", t.w, Y[-1])
        p_T = np.asarray(self.problem.cost_grad(y_T), dtype=float)
        for n in range(g.N, -1, -1):
            An, _, Kn = self._matrices(n)
            if n == g.N:
                rhs = np.outer(t.w, p_T)
            else:
                Bnext = self._matrices(n + 1)[1]
                rhs = Bnext.T @ P[n + 1]
            if self._step_kind(n) != "standard":
                P[n] = self._coupled_adjoint(n, An, Kn, rhs, Y[n], U[n], times[n])
                continue
            for i in range(s - 1, -1, -1):
                b = rhs[i] - An[i + 1:, i] @ P[n, i + 1:]
                if Kn[i, i] == 0.0:
                    P[n, i] = b / An[i, i]
                else:
                    P[n, i] = self._linear_stage(
                        ("std", i), n, An[i, i], Kn[i, i], times[n, i], Y[n, i], U[n, i], b
                    )
        return P

    def solve(self, U: np.ndarray, with_adjoint: bool = True) -> Trajectory:
        Y = self.forward(U)
        P = self.adjoint(Y, U) if with_adjoint else None
        return Trajectory(Y=Y, P=P, U=U, grid=self.grid, triplet=self.triplet)
