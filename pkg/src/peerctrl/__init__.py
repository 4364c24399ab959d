"""Implicit two-step peer triplets for ODE-constrained optimal control.

The package implements a first-discretize-then-optimize tool chain:
a catalog of implicit two-step peer method triplets, algebraic condition
checking, forward/adjoint sweeps over stage grids, discrete reduced
gradients, a box-constrained limited-memory optimizer, benchmark control
problems, and grid-refinement studies with experimental orders.
"""

from .algebra import MethodAlgebra, hankel_deviation, lop, nilpotent_shift, pascal, vandermonde
from .catalog import CatalogError, PeerTriplet, TRIPLET_NAMES, derive_b_matrices, load_triplet
from .conditions import ConditionReport, stability_angle, verify_triplet
from .convergence import ConvergenceRecord, records_to_csv, records_to_json, run_study
from .gradient import GradientResult, evaluate, postprocess_control, q_multipliers
from .optimize import OptimizeConfig, OptimizeResult, minimize, minimize_box
from .problems import (
    ControlProblem,
    HeatBoundaryProblem,
    QuadraticMixedProblem,
    SchloglProblem,
    heat_eigenpairs,
    make_problem,
    phi1,
)
from .sweeps import Grid, PeerSolver, StepFailure, Trajectory, control_mask

__version__ = "0.1.0"

__all__ = [
    "MethodAlgebra",
    "hankel_deviation",
    "lop",
    "nilpotent_shift",
    "pascal",
    "vandermonde",
    "CatalogError",
    "PeerTriplet",
    "TRIPLET_NAMES",
    "derive_b_matrices",
    "load_triplet",
    "ConditionReport",
    "stability_angle",
    "verify_triplet",
    "ConvergenceRecord",
    "records_to_csv",
    "records_to_json",
    "run_study",
    "GradientResult",
    "evaluate",
    "postprocess_control",
    "q_multipliers",
    "OptimizeConfig",
    "OptimizeResult",
    "minimize",
    "minimize_box",
    "ControlProblem",
    "HeatBoundaryProblem",
    "QuadraticMixedProblem",
    "SchloglProblem",
    "heat_eigenpairs",
    "make_problem",
    "phi1",
    "Grid",
    "PeerSolver",
    "StepFailure",
    "Trajectory",
    "control_mask",
    "__version__",
]
