"""Reduced cost, exact discrete gradient, and control post-processing.

The reduced objective treats the stage controls U as the only unknowns:
a forward sweep produces Y(U), the terminal cost is evaluated at
y_h(T) = (w^T (x) I) Y_N, and the backward adjoint sweep yields multipliers
P from which the gradient follows without any finite differencing:

    grad_{U_ni} = h * (d f / d u)(Y_ni, U_ni)^T  sum_j kappa_ji^[n] P_nj.

Blind stages (zero K column) carry no control unknown; their gradient
entries are kept at exact zero and the optimizer never sees them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import PeerTriplet
from .sweeps import Grid, PeerSolver, Trajectory, control_mask

__all__ = ["GradientResult", "evaluate", "postprocess_control", "q_multipliers"]


@dataclass
class GradientResult:
    """Cost and gradient of the reduced objective at one control iterate."""

    cost: float
    grad: np.ndarray  # (N+1, s, d), exact zeros at blind stages
    trajectory: Trajectory

    @property
    def y_norm(self) -> float:
        return float(np.max(np.abs(self.trajectory.Y)))

    @property
    def p_norm(self) -> float:
        return float(np.max(np.abs(self.trajectory.P)))


def evaluate(
    problem,
    triplet: PeerTriplet,
    grid: Grid,
    U: np.ndarray,
    solver: PeerSolver | None = None,
) -> GradientResult:
    """Reduced cost and its exact gradient with respect to the stage controls."""
    if solver is None:
        solver = PeerSolver(problem, triplet, grid)
    traj = solver.solve(U)
    cost = problem.cost(traj.y_terminal)
    grad = np.zeros_like(U)
    active = control_mask(triplet, grid)
    times = grid.stage_times(triplet)
    h = grid.h
    for n in range(grid.n_steps):
        Kn = triplet.step_matrices(n, grid.N)[2]
        for i in range(triplet.s):
            if not active[n, i]:
                continue
            weighted = np.einsum("j,jm->m", Kn[:, i], traj.P[n])
            grad[n, i] = h * (
                np.asarray(problem.jac_u(times[n, i], traj.Y[n, i], U[n, i])).T @ weighted
            )
    return GradientResult(cost=cost, grad=grad, trajectory=traj)


def postprocess_control(problem, triplet: PeerTriplet, grid: Grid, Y, P) -> np.ndarray:
    """Minimum-principle control: U_ni = argmin_u P_ni^T f(Y_ni, u), all stages."""
    out = np.zeros((grid.n_steps, triplet.s, problem.d))
    for n in range(grid.n_steps):
        for i in range(triplet.s):
            out[n, i] = problem.control_solve(Y[n, i], P[n, i])
    return out


def q_multipliers(triplet: PeerTriplet, n: int, P_n: np.ndarray, n_last: int) -> np.ndarray:
    """Stage multipliers Q_ni = (1/k_ni) sum_j kappa_ji^[n] P_nj.

    ``k_ni`` are the column sums of K_n; stages with vanishing column sum
    (blind or eliminated) have no multiplier and raise.
    """
    Kn = triplet.step_matrices(n, n_last)[2]
    sums = Kn.sum(axis=0)
    out = np.zeros_like(P_n)
    for i in range(triplet.s):
        if sums[i] == 0.0:
            if np.any(Kn[:, i] != 0.0):
                raise ZeroDivisionError(f"stage {i}: zero column sum with nonzero column")
            continue
        out[i] = np.einsum("j,jm->m", Kn[:, i], P_n) / sums[i]
    return out
