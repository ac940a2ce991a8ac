"""Augmented Lagrangian interior-point solver loop.

Equalities are relaxed with slacks r penalized by an augmented Lagrangian
(multiplier estimate lam, penalty rho); cone constraints carry slacks s with
a logarithmic barrier weighted by the central-path parameter kappa. Each
subproblem is solved by Newton steps on the stationarity system with a
fraction-to-boundary rule and a filter line search; between subproblems the
multiplier estimate, kappa, and rho are updated and the filter is reset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .cone import (
    NotInterior,
    SecondOrder,
    barrier_value,
    cone_product,
    cone_target,
    interior_initialization,
    max_step_to_boundary,
)
from .kkt import (
    DirectionOptions,
    OuterState,
    SolverPoint,
    residual,
    search_direction,
)
from .linsolve import (
    InertiaCorrectionFailure,
    NumericalFailure,
    RegularizationState,
)
from .model import EvalCache, EvaluationFailure, ProblemModel, evaluate, evaluate_values


class LineSearchFailure(RuntimeError):
    """Backtracking reached the minimum step without an acceptable point."""


class SolveStatus(enum.Enum):
    SOLVED = "solved"
    MAX_ITERATIONS = "max_iterations"
    LINE_SEARCH_FAILURE = "line_search_failure"
    INERTIA_CORRECTION_FAILURE = "inertia_correction_failure"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6                 # unrelaxed residual tolerance (gamma_R)
    subproblem_tol: float = 1e-2      # subproblem done when ||R|| <= this * kappa
    kappa_init: float = 1.0
    rho_init: float = 1.0
    kappa_min: float = 1e-8
    kappa_linear: float = 0.2         # kappa <- max(kappa_min, min(this*k, k^kappa_power))
    kappa_power: float = 1.2
    rho_grow: float = 10.0            # rho <- min(rho_max, max(this*rho, 1/kappa_new))
    rho_max: float = 1e8
    tau_min: float = 0.99             # fraction-to-boundary floor
    min_step: float = 1e-12
    armijo: float = 1e-8              # sufficient-decrease margins in the filter rule
    max_inner: int = 150              # per subproblem
    max_outer: int = 30
    max_total: int = 1000
    interior_margin: float = 1.0
    direction: DirectionOptions = DirectionOptions()
    record_trace: bool = False


@dataclass
class TraceRecord:
    iteration: int
    outer: int
    residual_norm: float
    merit: float
    violation: float
    alpha: float
    alpha_t: float
    eps_p: float
    eps_d: float
    kappa: float
    rho: float


@dataclass
class Solution:
    point: SolverPoint
    status: SolveStatus
    objective: float
    violation: float              # primal infeasibility of x: max(||g||, cone dist of h)
    residual_norm: float          # unrelaxed stationarity residual at the point
    total_iterations: int
    outer_iterations: int
    kappa: float
    rho: float
    trace: Optional[List[TraceRecord]] = None

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED


def merit(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    values: Optional[Tuple[float, np.ndarray, np.ndarray]] = None,
) -> float:
    """Augmented Lagrangian merit with the barrier on the cone slacks:
    c + lam'r + (rho/2) r'r - kappa * barrier(s)."""
    c = values[0] if values is not None else model.objective(point.x, theta)
    phi = float(c) + outer.lam @ point.r + 0.5 * outer.rho * (point.r @ point.r)
    if model.p:
        phi -= outer.kappa * barrier_value(point.s, model.cone)
    return float(phi)


def violation(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    values: Optional[Tuple[float, np.ndarray, np.ndarray]] = None,
) -> float:
    """Relaxation mismatch ||(g - r, h - s)||_1 / (m + p); zero when
    unconstrained."""
    mp = model.m + model.p
    if mp == 0:
        return 0.0
    if values is None:
        _, g, h = evaluate_values(model, point.x, theta)
    else:
        _, g, h = values
    return float(
        (np.abs(g - point.r).sum() + np.abs(h - point.s).sum()) / mp
    )


def cone_infeasibility(model: ProblemModel, h: np.ndarray) -> float:
    """Max violation of h with respect to the cone (0 when inside)."""
    worst = 0.0
    for seg, sl in model.cone.slices():
        v = h[sl]
        if v.size == 0:
            continue
        if isinstance(seg, SecondOrder) and seg.dim >= 2:
            worst = max(worst, np.linalg.norm(v[1:]) - v[0])
        else:
            worst = max(worst, float(-v.min()))
    return max(0.0, worst)


def unrelaxed_residual_norm(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    cache: Optional[EvalCache] = None,
) -> float:
    """Max norm over the stationarity rows with the relaxation removed:
    stationarity, -z-t, g-r, h-s, s o t, and r itself."""
    if cache is None:
        cache = evaluate(model, point.x, theta, point.y, point.z)
    rows = [
        cache.c_x + cache.g_x.T @ point.y + cache.h_x.T @ point.z,
        -point.z - point.t,
        cache.g - point.r,
        cache.h - point.s,
        cone_product(point.s, point.t, model.cone),
        point.r,
    ]
    return max((np.abs(v).max() if v.size else 0.0) for v in rows)


def solution_converged(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    tol: float,
    cache: Optional[EvalCache] = None,
) -> bool:
    """Inclusive comparison: the unrelaxed residual may sit exactly at tol."""
    return unrelaxed_residual_norm(model, point, theta, cache) <= tol


def subproblem_converged(residual_norm: float, kappa: float, subproblem_tol: float) -> bool:
    return residual_norm <= subproblem_tol * kappa


def outer_update(outer: OuterState, point: SolverPoint, opts: SolverOptions) -> OuterState:
    """Multiplier estimate takes the current duals; kappa decreases (linear
    then superlinear) and rho grows against the new kappa."""
    kappa = max(
        opts.kappa_min,
        min(opts.kappa_linear * outer.kappa, outer.kappa ** opts.kappa_power),
    )
    rho = min(opts.rho_max, max(opts.rho_grow * outer.rho, 1.0 / kappa))
    return OuterState(lam=point.y.copy(), rho=rho, kappa=kappa)


class Filter:
    """Set of (merit, violation) pairs; a candidate dominated by any entry
    (both components no better) is rejected."""

    def __init__(self):
        self.entries: List[Tuple[float, float]] = []

    def dominated(self, phi: float, eta: float) -> bool:
        return any(phi_f <= phi and eta_f <= eta for phi_f, eta_f in self.entries)

    def add(self, phi: float, eta: float) -> None:
        self.entries = [
            (phi_f, eta_f)
            for phi_f, eta_f in self.entries
            if not (phi <= phi_f and eta <= eta_f)
        ]
        self.entries.append((phi, eta))

    def reset(self) -> None:
        self.entries.clear()


def cone_line_search(
    point: SolverPoint, delta: SolverPoint, tau: float, model: ProblemModel
) -> Tuple[float, float]:
    """Fraction-to-boundary step caps for the slacks s and complements t."""
    if model.p == 0:
        return 1.0, 1.0
    alpha = max_step_to_boundary(point.s, delta.s, tau, model.cone)
    alpha_t = max_step_to_boundary(point.t, delta.t, tau, model.cone)
    return alpha, alpha_t


def filter_step(
    model: ProblemModel,
    point: SolverPoint,
    delta: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    filt: Filter,
    opts: SolverOptions,
    alpha_init: float,
    alpha_t: float,
    current: Tuple[float, float],
) -> Tuple[SolverPoint, float, Tuple[float, float]]:
    """Backtrack on the primal step until the filter accepts the candidate.

    Acceptance requires sufficient decrease in merit or violation relative to
    the current point and non-domination by the filter. Duals move by the
    accepted alpha; the complement block moves by its own boundary cap.
    Returns the new point, the accepted alpha, and the accepted pair.
    """
    phi0, eta0 = current
    alpha = alpha_init
    while alpha >= opts.min_step:
        cand = SolverPoint(
            x=point.x + alpha * delta.x,
            r=point.r + alpha * delta.r,
            s=point.s + alpha * delta.s,
            y=point.y,
            z=point.z,
            t=point.t,
        )
        try:
            values = evaluate_values(model, cand.x, theta)
            phi = merit(model, cand, theta, outer, values)
            eta = violation(model, cand, theta, values)
        except (NotInterior, EvaluationFailure):
            alpha *= 0.5
            continue
        sufficient = (phi < phi0 - opts.armijo * eta0) or (eta < (1.0 - opts.armijo) * eta0)
        if sufficient and not filt.dominated(phi, eta):
            cand.y = point.y + alpha * delta.y
            cand.z = point.z + alpha * delta.z
            cand.t = point.t + alpha_t * delta.t
            filt.add(phi, eta)
            return cand, alpha, (phi, eta)
        alpha *= 0.5
    raise LineSearchFailure(f"no acceptable step above {opts.min_step:g}")


def initialize_point(model: ProblemModel, x0: np.ndarray, theta: np.ndarray, opts: SolverOptions) -> SolverPoint:
    _, g0, h0 = evaluate_values(model, x0, theta)
    return SolverPoint(
        x=np.asarray(x0, dtype=float).copy(),
        r=g0.copy(),
        s=interior_initialization(h0, model.cone, opts.interior_margin),
        y=np.zeros(model.m),
        z=np.zeros(model.p),
        t=cone_target(model.cone),
    )


def solve(
    model: ProblemModel,
    x0: np.ndarray,
    theta: Optional[np.ndarray] = None,
    opts: SolverOptions = SolverOptions(),
) -> Solution:
    """Run the solver from x0; never raises on numerical trouble, reporting
    it through the returned status instead."""
    theta = np.zeros(model.d) if theta is None else np.asarray(theta, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({model.n},)")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")

    trace: List[TraceRecord] = []
    status = SolveStatus.MAX_ITERATIONS
    total = 0
    outer_count = 0
    point = None
    outer = OuterState(lam=np.zeros(model.m), rho=opts.rho_init, kappa=opts.kappa_init)
    try:
        point = initialize_point(model, x0, theta, opts)
        reg = RegularizationState()
        filt = Filter()
        values = evaluate_values(model, point.x, theta)
        current = (
            merit(model, point, theta, outer, values),
            violation(model, point, theta, values),
        )
        inner = 0
        while True:
            cache = evaluate(model, point.x, theta, point.y, point.z)
            if solution_converged(model, point, theta, opts.tol, cache):
                status = SolveStatus.SOLVED
                break
            if total >= opts.max_total:
                break
            R = residual(model, point, theta, outer, cache)
            norm_R = np.abs(R).max() if R.size else 0.0
            if subproblem_converged(norm_R, outer.kappa, opts.subproblem_tol):
                if outer_count >= opts.max_outer:
                    break
                outer = outer_update(outer, point, opts)
                outer_count += 1
                filt.reset()
                inner = 0
                values = evaluate_values(model, point.x, theta)
                current = (
                    merit(model, point, theta, outer, values),
                    violation(model, point, theta, values),
                )
                continue
            if inner >= opts.max_inner:
                break
            delta, reg, info = search_direction(
                model, point, theta, outer, reg, opts.direction, cache
            )
            tau = max(opts.tau_min, 1.0 - outer.kappa)
            alpha_cap, alpha_t = cone_line_search(point, delta, tau, model)
            point, alpha, current = filter_step(
                model, point, delta, theta, outer, filt, opts, alpha_cap, alpha_t, current
            )
            total += 1
            inner += 1
            if opts.record_trace:
                trace.append(
                    TraceRecord(
                        iteration=total, outer=outer_count, residual_norm=norm_R,
                        merit=current[0], violation=current[1], alpha=alpha,
                        alpha_t=alpha_t, eps_p=info.eps_p, eps_d=info.eps_d,
                        kappa=outer.kappa, rho=outer.rho,
                    )
                )
    except LineSearchFailure:
        status = SolveStatus.LINE_SEARCH_FAILURE
    except InertiaCorrectionFailure:
        status = SolveStatus.INERTIA_CORRECTION_FAILURE
    except (NumericalFailure, EvaluationFailure, NotInterior):
        status = SolveStatus.NUMERICAL_FAILURE

    if point is None:  # initialization itself failed
        point = SolverPoint(
            x=x0.copy(), r=np.zeros(model.m), s=np.ones(model.p),
            y=np.zeros(model.m), z=np.zeros(model.p), t=np.ones(model.p),
        )
    try:
        c, g, h = evaluate_values(model, point.x, theta)
        primal_violation = max(
            float(np.abs(g).max()) if g.size else 0.0,
            cone_infeasibility(model, h),
        )
        res_norm = unrelaxed_residual_norm(model, point, theta)
    except Exception:
        c, primal_violation, res_norm = np.nan, np.nan, np.nan
    return Solution(
        point=point,
        status=status,
        objective=float(c),
        violation=primal_violation,
        residual_norm=float(res_norm),
        total_iterations=total,
        outer_iterations=outer_count,
        kappa=outer.kappa,
        rho=outer.rho,
        trace=trace if opts.record_trace else None,
    )
