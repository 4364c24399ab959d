"""Small-matrix building blocks shared by the coefficient catalog and the verifier.

Everything here acts on the s-stage node vector c and small orders q <= s:
Vandermonde matrices, the Pascal matrix, the nilpotent derivative-shift
matrix, and helpers for Hankel-structure diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np


def vandermonde(c: np.ndarray, q: int) -> np.ndarray:
    """Columns 1, c, c^2, ..., c^(q-1); shape (len(c), q)."""
    c = np.asarray(c, dtype=float)
    return np.vander(c, q, increasing=True)


def pascal(q: int) -> np.ndarray:
    """Upper-triangular binomial matrix, entry (i, j) = C(j, i) (0-based)."""
    return np.array([[comb(j, i) for j in range(q)] for i in range(q)], dtype=float)


def nilpotent_shift(q: int) -> np.ndarray:
    """Derivative action on monomial coefficients: entries i on the first superdiagonal."""
    e = np.zeros((q, q))
    for i in range(1, q):
        e[i - 1, i] = i
    return e


def stage_scaling(s: int) -> np.ndarray:
    """diag(1, 2, ..., s)."""
    return np.diag(np.arange(1, s + 1, dtype=float))


def lop(x: np.ndarray) -> np.ndarray:
    """The singular operator X -> E_q^T X + X E_r used in the combined conditions."""
    q, r = x.shape
    return nilpotent_shift(q).T @ x + x @ nilpotent_shift(r)


def hankel_deviation(x: np.ndarray) -> float:
    """Max spread (max - min) over the anti-diagonals of x; zero iff Hankel."""
    q, r = x.shape
    dev = 0.0
    for k in range(q + r - 1):
        vals = [x[i, k - i] for i in range(max(0, k - r + 1), min(q, k + 1))]
        dev = max(dev, max(vals) - min(vals))
    return dev


@dataclass(frozen=True)
class MethodAlgebra:
    """Node-dependent matrices for one consistency order q."""

    order: int
    nodes: np.ndarray = field(repr=False)

    @property
    def V(self) -> np.ndarray:
        return vandermonde(self.nodes, self.order)

    @property
    def P(self) -> np.ndarray:
        return pascal(self.order)

    @property
    def E(self) -> np.ndarray:
        return nilpotent_shift(self.order)

    @property
    def D(self) -> np.ndarray:
        return stage_scaling(len(self.nodes))

    @property
    def C(self) -> np.ndarray:
        return np.diag(np.asarray(self.nodes, dtype=float))
