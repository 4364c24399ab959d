"""Shared fixtures and oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from peerctrl.catalog import TRIPLET_NAMES, load_triplet
from peerctrl.gradient import evaluate
from peerctrl.sweeps import Grid, PeerSolver


@pytest.fixture(scope="session")
def triplets():
    """All catalogued method triplets, keyed by name."""
    return {name: load_triplet(name) for name in TRIPLET_NAMES}


def fd_gradient(problem, triplet, grid, U, mask, eps=1e-6):
    """Central finite-difference gradient of the reduced cost (oracle).

    Independent of the adjoint sweep: every entry comes from two forward
    solves of the perturbed control.
    """
    solver = PeerSolver(problem, triplet, grid)

    def cost(Uc):
        return problem.cost(solver.solve(Uc, with_adjoint=False).y_terminal)

    grad = np.zeros_like(U)
    for idx in np.ndindex(U.shape):
        if not mask[idx[0], idx[1]]:
            continue
        Up = U.copy()
        Up[idx] += eps
        Um = U.copy()
        Um[idx] -= eps
        grad[idx] = (cost(Up) - cost(Um)) / (2.0 * eps)
    return grad


def reduced_cost_and_grad(problem, triplet, grid, U):
    res = evaluate(problem, triplet, grid, U)
    return res.cost, res.grad
