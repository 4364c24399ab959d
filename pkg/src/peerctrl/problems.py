"""Benchmark control problems in Mayer form.

All problems expose the same interface consumed by the sweeps and the
optimizer:

* ``m``, ``d``: state and control dimensions, ``T``: horizon, ``y0``
* ``f(t, y, u)``, ``jac_y(t, y, u)``, ``jac_u(t, y, u)``
* terminal cost ``cost(yT)`` and its gradient ``cost_grad(yT)``
* ``control_solve(y, q, k=1)``: box-admissible minimizer of q^T f(y, .)
* ``lo``/``hi`` box bounds and the ``jac_y_constant`` flag

Objectives with running costs are absorbed into an auxiliary state
component.  The auxiliary rate is scaled so that the terminal cost gradient
has a unit entry in the auxiliary slot: its discrete multiplier then equals
one exactly at every stage, which the tests rely on.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

__all__ = [
    "ControlProblem",
    "QuadraticMixedProblem",
    "HeatBoundaryProblem",
    "SchloglProblem",
    "phi1",
    "heat_eigenpairs",
    "make_problem",
]


def phi1(z):
    """phi_1(z) = (e^z - 1)/z, by series near zero to dodge cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    safe = np.where(small, 1.0, z)
    direct = np.expm1(safe) / safe
    zs = np.where(small, z, 0.0)
    series = 1.0 + zs / 2.0 + zs**2 / 6.0 + zs**3 / 24.0 + zs**4 / 120.0
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def _clip(u, lo, hi):
    return np.clip(u, lo, hi)


class ControlProblem:
    """Base class fixing defaults shared by all benchmark problems."""

    jac_y_constant = False
    lo = -np.inf
    hi = np.inf

    m: int
    d: int
    T: float


# ---------------------------------------------------------------------------
# scalar quadratic regulator with a mixed state-control term
# ---------------------------------------------------------------------------


class QuadraticMixedProblem(ControlProblem):
    """Scalar linear dynamics with quadratic running cost and mixed term.

    minimize (1/2) int_0^1 (1.25 y1^2 + y1 u + u^2) dt
    subject to y1' = 0.5 y1 + u, y1(0) = 1.

    In Mayer form the running cost becomes y2' = (1.25 y1^2 + y1 u + u^2)/2
    with cost y2(1); the optimal solution is known in closed form.
    """

    name = "quadratic"
    m = 2
    d = 1
    T = 1.0

    def __init__(self, lo=-np.inf, hi=np.inf):
        self.y0 = np.array([1.0, 0.0])
        self.lo = lo
        self.hi = hi

    def f(self, t, y, u):
        y1, uu = y[0], u[0]
        return np.array([0.5 * y1 + uu, 0.5 * (1.25 * y1**2 + y1 * uu + uu**2)])

    def jac_y(self, t, y, u):
        y1, uu = y[0], u[0]
        return np.array([[0.5, 0.0], [0.5 * (2.5 * y1 + uu), 0.0]])

    def jac_u(self, t, y, u):
        return np.array([[1.0], [0.5 * (y[0] + 2.0 * u[0])]])

    def cost(self, yT):
        return float(yT[1])

    def cost_grad(self, yT):
        return np.array([0.0, 1.0])

    def control_solve(self, y, q, k=1.0):
        # stationarity of q1 (0.5 y1 + u) + q2 (1.25 y1^2 + y1 u + u^2)/2 in u
        u = -q[0] / q[1] - 0.5 * y[0]
        return _clip(np.array([u]), self.lo, self.hi)

    # closed-form optimum --------------------------------------------------

    @staticmethod
    def exact_solution(t):
        """(y1*, u*, p1*) at time t; valid slightly beyond t = 1."""
        y1 = np.cosh(1.0 - t) / np.cosh(1.0)
        u = -(np.tanh(1.0 - t) + 0.5) * np.cosh(1.0 - t) / np.cosh(1.0)
        p1 = -0.5 * (y1 + 2.0 * u)
        return y1, u, p1

    def optimal_cost(self):
        """Value of the objective along the analytic optimum (quadrature)."""
        from scipy.integrate import quad

        def integrand(t):
            y1, u, _ = self.exact_solution(t)
            return 0.5 * (1.25 * y1**2 + y1 * u + u**2)

        val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        return val


# ---------------------------------------------------------------------------
# boundary control of the semi-discrete 1D heat equation
# ---------------------------------------------------------------------------


def heat_eigenpairs(m: int):
    """Eigenvalues and orthonormal eigenvectors of the heat FD matrix."""
    k = np.arange(1, m + 1)
    omega = (k - 0.5) * np.pi
    lam = -4.0 * m**2 * np.sin(omega / (2.0 * m)) ** 2
    nu = 2.0 / np.sqrt(2.0 * m + np.sin(2.0 * omega) / np.sin(omega / m))
    i = np.arange(1, m + 1)
    V = nu[None, :] * np.cos(np.outer(2.0 * i - 1.0, omega) / (2.0 * m))
    return lam, V  # V[:, k-1] is the k-th eigenvector


class HeatBoundaryProblem(ControlProblem):
    """Dirichlet boundary control of a 1D finite-difference heat equation.

    minimize (1/2) ||y(1) - yhat||^2 + (1/2) int_0^1 u^2 dt
    subject to y' = A y + gamma e_m u, y(0) = 1,

    where the target yhat is constructed so that the optimal control and
    adjoint are known analytically through the eigenexpansion of A.  The
    running cost is carried by an auxiliary component y_{m+1}' = u^2/2.
    """

    name = "heat"
    d = 1
    T = 1.0
    jac_y_constant = True
    delta = 1.0 / 75.0

    def __init__(self, m_space: int = 50, lo=-np.inf, hi=np.inf):
        self.m_space = m_space
        self.m = m_space + 1  # auxiliary component appended
        self.lo = lo
        self.hi = hi
        dx2 = 1.0 / m_space**2
        self.gamma = 2.0 / dx2
        A = np.zeros((m_space, m_space))
        idx = np.arange(m_space)
        A[idx, idx] = -2.0
        A[idx[:-1], idx[:-1] + 1] = 1.0
        A[idx[1:], idx[1:] - 1] = 1.0
        A[0, 0] = -1.0
        A[-1, -1] = -3.0
        A /= dx2
        self.A = A
        self.y0 = np.concatenate([np.ones(m_space), [0.0]])
        self._jac = np.zeros((self.m, self.m))
        self._jac[:m_space, :m_space] = A
        self.lam, self.V = heat_eigenpairs(m_space)
        self.yhat = self.exact_terminal_state()[:m_space] - self.delta * (
            self.V[:, 0] + self.V[:, 1]
        )

    def f(self, t, y, u):
        out = np.empty(self.m)
        out[:-1] = self.A @ y[:-1]
        out[-2] += self.gamma * u[0]
        out[-1] = 0.5 * u[0] ** 2
        return out

    def jac_y(self, t, y, u):
        return self._jac

    def jac_u(self, t, y, u):
        col = np.zeros((self.m, 1))
        col[-2, 0] = self.gamma
        col[-1, 0] = u[0]
        return col

    def cost(self, yT):
        return float(0.5 * np.sum((yT[:-1] - self.yhat) ** 2) + yT[-1])

    def cost_grad(self, yT):
        return np.concatenate([yT[:-1] - self.yhat, [1.0]])

    def control_solve(self, y, q, k=1.0):
        u = -self.gamma * q[-2] / q[-1]
        return _clip(np.array([u]), self.lo, self.hi)

    # analytic reference ----------------------------------------------------

    def exact_adjoint(self, t):
        """p*(t) for the first m components (the auxiliary multiplier is 1)."""
        w = self.delta * np.exp(self.lam[:2] * (self.T - t))
        return self.V[:, :2] @ w

    def exact_control(self, t):
        return -self.gamma * self.exact_adjoint(t)[-1]

    def exact_terminal_state(self):
        """y*(T) including the auxiliary running-cost component."""
        ms = self.m_space
        lam, V = self.lam, self.V
        eta0 = V.T @ np.ones(ms)
        conv = np.array(
            [
                np.sum(V[-1, :2] * phi1((lam[k] + lam[:2]) * self.T))
                for k in range(ms)
            ]
        )
        eta_T = np.exp(lam * self.T) * eta0 - self.gamma**2 * self.delta * self.T * V[-1] * conv
        # auxiliary value: (1/2) int u*^2 = (gamma^2 delta^2 T / 2) sum_{l,l'} ...
        pair = np.add.outer(lam[:2], lam[:2])
        aux = 0.5 * self.gamma**2 * self.delta**2 * self.T * np.sum(
            np.outer(V[-1, :2], V[-1, :2]) * phi1(pair * self.T)
        )
        return np.concatenate([V @ eta_T, [aux]])


# ---------------------------------------------------------------------------
# distributed control of a Schloegl-type nucleation process
# ---------------------------------------------------------------------------


def _schlogl_space(m: int, length: float = 20.0):
    dx = length / m
    x = (np.arange(1, m + 1) - 0.5) * dx
    A = np.zeros((m, m))
    idx = np.arange(m)
    A[idx, idx] = -2.0
    A[idx[:-1], idx[:-1] + 1] = 1.0
    A[idx[1:], idx[1:] - 1] = 1.0
    A[0, 0] = -1.0
    A[-1, -1] = -1.0
    A /= dx**2
    M = np.zeros((m, m))
    M[idx, idx] = 8.0
    M[0, 0] = M[-1, -1] = 10.0
    M[idx[:-1], idx[:-1] + 1] = 2.0
    M[idx[1:], idx[1:] - 1] = 2.0
    M *= dx / 12.0
    return x, A, M


class _NaturalNucleation(ControlProblem):
    """Uncontrolled Schlögl dynamics on the m-cell grid (no auxiliary state)."""

    d = 0

    def __init__(self, m: int, horizon: float):
        self.m = m
        self.T = horizon
        x, self._A, _ = _schlogl_space(m)
        self.y0 = np.where((x >= 9.0) & (x <= 11.0), 1.2 * math.sqrt(3.0), 0.0)

    def f(self, t, y, u):
        return self._A @ y + y - y**3 / 3.0

    def jac_y(self, t, y, u):
        return self._A + np.diag(1.0 - y**2)

    def jac_u(self, t, y, u):  # pragma: no cover - no control
        return np.zeros((self.m, 0))

    def cost(self, yT):  # pragma: no cover - never optimized
        return 0.0

    def cost_grad(self, yT):  # pragma: no cover
        return np.zeros(self.m)


def _natural_run(m: int, triplet_name: str, n_steps: int, horizon: float):
    """Stage times, stage values, and t=2.5 snapshot of the uncontrolled run."""
    from .catalog import load_triplet
    from .sweeps import Grid, PeerSolver

    triplet = load_triplet(triplet_name)
    prob = _NaturalNucleation(m, horizon)
    grid = Grid(n_steps=n_steps, horizon=horizon)
    solver = PeerSolver(prob, triplet, grid)
    traj = solver.solve(np.zeros((grid.n_steps, triplet.s, 0)), with_adjoint=False)
    return grid.stage_times(triplet), traj.Y, triplet.w


@functools.lru_cache(maxsize=4)
def _natural_solution(m: int):
    """Uncontrolled nucleation run on [0, 2.5]: spline in time + snapshot.

    Computed with the order-(4,3) triplet on a fine grid and interpolated
    through all stage times; the snapshot at t = 2.5 is the terminal stage
    combination.
    """
    times, values, w = _natural_run(m, "AP4o43p", 800, 2.5)
    flat_t = times.ravel()
    flat_v = values.reshape(-1, m)
    # terminal stage combination of the last step approximates y(2.5)
    snapshot = w @ values[-1]
    flat_t = np.concatenate([flat_t, [2.5]])
    flat_v = np.vstack([flat_v, snapshot])
    return CubicSpline(flat_t, flat_v, axis=0), snapshot


@functools.lru_cache(maxsize=16)
def _aligned_target(m: int, triplet_name: str, n_half: int, h: float):
    """Grid-consistent discrete target: natural stages + frozen snapshot.

    Runs the uncontrolled dynamics with the same triplet and step size as
    the controlled computation for one extra step past the freezing time, so
    every pre-freeze stage value of the target coincides exactly with what
    the controlled scheme produces under zero control.  The snapshot is the
    terminal stage combination of the step ending at the freezing time.
    """
    times, values, w = _natural_run(m, triplet_name, n_half + 1, (n_half + 1) * h)
    snapshot = w @ values[n_half - 1]
    flat_t = times.ravel()
    flat_v = values.reshape(-1, m)
    order = np.argsort(flat_t)
    return flat_t[order], flat_v[order], snapshot


class SchloglProblem(ControlProblem):
    """Stopping a nucleation wave in a semilinear reaction-diffusion model.

    minimize (1/2) int (Y - Y_Q)^2 + (alpha/2) int U^2 over the space-time
    cylinder, where Y_Q freezes the uncontrolled solution at t = 2.5.  The
    spatial discretization uses m cells on [0, 20]; running costs use the
    tridiagonal spline quadrature matrix M and live in an auxiliary
    component.
    """

    name = "schlogl"
    T = 5.0
    alpha = 1e-6
    k_reac = 1.0 / 3.0
    t_freeze = 2.5

    def __init__(self, m_space: int = 300, lo=-np.inf, hi=np.inf):
        self.m_space = m_space
        self.m = m_space + 1
        self.d = m_space
        self.lo = lo
        self.hi = hi
        self.x, self.A_hat, self.M = _schlogl_space(m_space)
        self.y0 = np.concatenate(
            [np.where((self.x >= 9.0) & (self.x <= 11.0), 1.2 * math.sqrt(3.0), 0.0), [0.0]]
        )
        self._spline, self._snapshot = _natural_solution(m_space)
        self._snapshot_cur = self._snapshot
        self._table_t = None
        self._table_v = None
        self._yq_cache: dict[float, np.ndarray] = {}
        # banded storage of M for the control solves
        self._m_banded = np.zeros((3, m_space))
        self._m_banded[0, 1:] = np.diag(self.M, 1)
        self._m_banded[1] = np.diag(self.M)
        self._m_banded[2, :-1] = np.diag(self.M, -1)

    def align_target(self, triplet, grid) -> bool:
        """Switch the target to the natural solution on the matching grid.

        When the freezing time is an integer number of steps away, the
        pre-freeze target stage values are generated by the very same scheme
        and step size as the controlled run, so they agree exactly with the
        zero-control trajectory; the frozen snapshot and the analytic
        stopping control are rebuilt from the same run.  This keeps the
        discrete objective free of target-interpolation error, which would
        otherwise dwarf the quantities being optimized.  Falls back to the
        fine-grid spline when the grid does not hit the freezing time.
        """
        n_half = int(round(self.t_freeze / grid.h))
        aligned = (
            1 <= n_half < grid.n_steps
            and abs(n_half * grid.h - self.t_freeze) <= 1e-9 * self.t_freeze
        )
        if aligned:
            self._table_t, self._table_v, self._snapshot_cur = _aligned_target(
                self.m_space, triplet.name, n_half, grid.h
            )
        else:
            self._table_t = self._table_v = None
            self._snapshot_cur = self._snapshot
        self._yq_cache.clear()
        return aligned

    def y_q(self, t: float) -> np.ndarray:
        """Target profile: the natural solution, frozen after t = 2.5."""
        if t >= self.t_freeze:
            return self._snapshot_cur
        val = self._yq_cache.get(t)
        if val is None:
            if self._table_t is not None:
                j = np.searchsorted(self._table_t, t)
                for k in (j - 1, j):
                    if 0 <= k < self._table_t.size and abs(self._table_t[k] - t) <= 1e-9:
                        val = self._table_v[k]
                        break
            if val is None:
                val = self._spline(t)
            self._yq_cache[t] = val
        return val

    def u_stop(self, t: float) -> np.ndarray:
        """Stopping control (equilibrium of the frozen profile) on the grid."""
        if t <= self.t_freeze:
            return np.zeros(self.m_space)
        y = self._snapshot_cur
        return self.k_reac * y**3 - y - self.A_hat @ y

    def f(self, t, y, u):
        ys = y[:-1]
        dev = ys - self.y_q(t)
        out = np.empty(self.m)
        out[:-1] = self.A_hat @ ys + ys - self.k_reac * ys**3 + u
        out[-1] = 0.5 * dev @ (self.M @ dev) + 0.5 * self.alpha * u @ (self.M @ u)
        return out

    def jac_y(self, t, y, u):
        ys = y[:-1]
        J = np.zeros((self.m, self.m))
        J[:-1, :-1] = self.A_hat + np.diag(1.0 - 3.0 * self.k_reac * ys**2)
        J[-1, :-1] = self.M @ (ys - self.y_q(t))
        return J

    def jac_u(self, t, y, u):
        J = np.zeros((self.m, self.d))
        J[:-1] = np.eye(self.m_space)
        J[-1] = self.alpha * (self.M @ u)
        return J

    def cost(self, yT):
        return float(yT[-1])

    def cost_grad(self, yT):
        g = np.zeros(self.m)
        g[-1] = 1.0
        return g

    def control_solve(self, y, q, k=1.0):
        # stationary point of q_s^T u + q_aux (alpha/2) u^T M u, then clipped
        u = solve_banded((1, 1), self._m_banded, -q[:-1] / (self.alpha * q[-1]))
        return _clip(u, self.lo, self.hi)

    def control_hessian_solve(self, G, scales):
        """Apply the inverse control-cost Hessian blocks (alpha*scale*M)^-1.

        ``G`` stacks one gradient row per active stage control; ``scales``
        carries h times the control weight of that stage.  Used as a block
        preconditioner: these tridiagonal blocks are the only exactly known
        part of the reduced Hessian.
        """
        X = solve_banded((1, 1), self._m_banded, G.T).T
        return X / (self.alpha * scales[:, None])

    def control_hessian_apply(self, G, scales):
        """Apply the control-cost Hessian blocks alpha*scale*M (see above)."""
        return (self.alpha * scales[:, None]) * (G @ self.M)


_FACTORIES = {
    "quadratic": lambda m, lo, hi: QuadraticMixedProblem(lo=lo, hi=hi),
    "heat": lambda m, lo, hi: HeatBoundaryProblem(m_space=m or 50, lo=lo, hi=hi),
    "schlogl": lambda m, lo, hi: SchloglProblem(m_space=m or 300, lo=lo, hi=hi),
}


def make_problem(name: str, m: int | None = None, lo=-np.inf, hi=np.inf):
    """Instantiate a benchmark problem by name."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(_FACTORIES)}") from None
    return factory(m, lo, hi)
