"""Differentiable augmented Lagrangian interior-point solver.

Equality constraints are relaxed through a primal-dual augmented Lagrangian,
cone constraints (nonnegative orthant and second-order segments) through a
primal-dual interior point; solutions are differentiable with respect to
problem parameters via the implicit function theorem. ``trajopt`` transcribes
stage-wise trajectory problems into this form and ``bench`` carries the
benchmark registry and CLI.
"""

from .cone import ConeSpec, InvalidDimension, NotInterior, Orthant, SecondOrder
from .linsolve import NumericalFailure
from .model import EvaluationFailure, ProblemModel, validate_derivatives
from .sensitivity import SensitivityResult, differentiate
from .solver import Solution, SolveStatus, SolverOptions, solve
from .trajopt import (
    Stage,
    TrajectoryProblem,
    dynamics_rollout,
    extract_trajectory,
    stack_trajectory,
    transcribe,
)

__version__ = "0.1.0"

__all__ = [
    "ConeSpec",
    "EvaluationFailure",
    "InvalidDimension",
    "NotInterior",
    "NumericalFailure",
    "Orthant",
    "ProblemModel",
    "SecondOrder",
    "SensitivityResult",
    "Solution",
    "SolveStatus",
    "SolverOptions",
    "Stage",
    "TrajectoryProblem",
    "differentiate",
    "dynamics_rollout",
    "extract_trajectory",
    "solve",
    "stack_trajectory",
    "transcribe",
    "validate_derivatives",
    "__version__",
]
