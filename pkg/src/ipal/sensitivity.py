"""Parameter sensitivities of converged solutions by the implicit function
theorem: J(w*) dw/dtheta = -dR/dtheta, with the Jacobian taken at zero
regularization and the final penalty.

The multiplier estimate is differentiated at its fixed point (dlam = dy), so
the relaxation rows give dr = 0 and equality constraints stay exactly
satisfied to first order. Differentiating with the estimate frozen instead
would leave an O(1/rho) mismatch against re-solving, which the boundary-value
structure of trajectory problems amplifies well past usable accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kkt import Layout, OuterState, SolverPoint, full_jacobian
from .linsolve import RegularizationState
from .model import ProblemModel, evaluate, evaluate_parameter_jacobians
from .solver import Solution, unrelaxed_residual_norm


@dataclass
class SensitivityResult:
    """Columns are parameter directions; rows follow the iterate stacking."""

    dw: np.ndarray  # (n + 2m + 3p, d)
    dx: np.ndarray  # (n, d) slice of dw
    used_least_squares: bool
    residual_norm: float  # stationarity residual norm at the point differentiated


def residual_parameter_jacobian(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
) -> np.ndarray:
    """dR/dtheta: stationarity rows get the Lagrangian cross derivative,
    constraint rows get g_theta / h_theta, relaxation and cone rows are
    parameter-free."""
    lay = Layout(model.n, model.m, model.p)
    L_xt, g_t, h_t = evaluate_parameter_jacobians(model, point.x, theta, point.y, point.z)
    Rt = np.zeros((lay.total, model.d))
    Rt[lay.x] = L_xt
    Rt[lay.y] = g_t
    Rt[lay.z] = h_t
    return Rt


def differentiate(
    model: ProblemModel,
    solution: Solution,
    theta: np.ndarray,
    rank_tol: Optional[float] = None,
) -> SensitivityResult:
    """Differentiate a converged solution with respect to theta.

    All parameter columns are solved in one factorization, so the result is
    deterministic and column order matches theta order. A rank-deficient
    Jacobian falls back to the least-squares solution and flags it. The
    solution point is not modified.
    """
    point = solution.point
    theta = np.asarray(theta, dtype=float)
    lay = Layout(model.n, model.m, model.p)
    cache = evaluate(model, point.x, theta, point.y, point.z)
    outer = OuterState(lam=np.zeros(model.m), rho=solution.rho, kappa=solution.kappa)
    J = full_jacobian(model, point, theta, outer, RegularizationState(), cache)
    # dlam = dy at the converged estimate cancels the -I coupling, pinning
    # dr = 0 through the (rho + eps) diagonal
    J[lay.r, lay.y] = 0.0
    Rt = residual_parameter_jacobian(model, point, theta)

    # row equilibration: the penalty block scales with rho, the cone rows with
    # the barrier; balancing rows keeps the LU solve well conditioned
    row_scale = np.abs(J).max(axis=1)
    row_scale[row_scale == 0.0] = 1.0
    Js = J / row_scale[:, None]
    Rts = Rt / row_scale[:, None]

    used_lstsq = False
    rank = np.linalg.matrix_rank(Js, tol=rank_tol)
    if rank < Js.shape[0]:
        dw = np.linalg.lstsq(Js, -Rts, rcond=None)[0]
        used_lstsq = True
    else:
        dw = np.linalg.solve(Js, -Rts)
        scale = 1.0 + (np.abs(Rts).max() if Rts.size else 0.0)
        res = np.abs(Js @ dw + Rts).max() if dw.size else 0.0
        if not np.isfinite(res) or res > 1e-6 * scale:
            dw = np.linalg.lstsq(Js, -Rts, rcond=None)[0]
            used_lstsq = True

    return SensitivityResult(
        dw=dw,
        dx=dw[: model.n].copy(),
        used_least_squares=used_lstsq,
        residual_norm=unrelaxed_residual_norm(model, point, theta, cache),
    )
