"""Stationarity residual, Jacobian, symmetric reduction, and directions.

The iterate is w = (x, r, s, y, z, t): primal variables, equality
relaxation, cone slacks, equality duals, cone duals, and cone complements.
The residual stacks, in that order,

    c_x + g_x'y + h_x'z
    lam + rho*r - y
    -z - t
    g - r
    h - s
    s o t - kappa*e

where lam/rho are the multiplier estimate and penalty of the outer loop and
kappa is the central-path parameter. Search directions solve the Newton
system J dw = -R through a symmetric 3x3-block reduction in (dx, dy, dz)
whose factorization also drives inertia-based regularization; cone slack and
complement blocks are recovered in closed form. On second-order segments the
reduced cone block is symmetrized, so directions are polished by iterative
refinement against the full system, with a dense fallback if refinement
cannot reach the consistency bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .cone import SecondOrder, cone_product, cone_product_jacobians, cone_target
from .linsolve import (
    InertiaOptions,
    NumericalFailure,
    RegularizationState,
    SymmetricFactorization,
    correct_inertia,
    factorize,
    solve_refined,
)
from .model import EvalCache, ProblemModel, evaluate


@dataclass
class SolverPoint:
    """One full iterate; also used for direction increments."""

    x: np.ndarray
    r: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: np.ndarray

    def copy(self) -> "SolverPoint":
        return SolverPoint(
            self.x.copy(), self.r.copy(), self.s.copy(),
            self.y.copy(), self.z.copy(), self.t.copy(),
        )


@dataclass
class OuterState:
    """Multiplier estimate, penalty, and central-path parameter."""

    lam: np.ndarray
    rho: float
    kappa: float


@dataclass(frozen=True)
class Layout:
    """Index bookkeeping for the stacked iterate/residual."""

    n: int
    m: int
    p: int

    @property
    def total(self) -> int:
        return self.n + 2 * self.m + 3 * self.p

    @property
    def x(self) -> slice:
        return slice(0, self.n)

    @property
    def r(self) -> slice:
        return slice(self.n, self.n + self.m)

    @property
    def s(self) -> slice:
        return slice(self.n + self.m, self.n + self.m + self.p)

    @property
    def y(self) -> slice:
        return slice(self.n + self.m + self.p, self.n + 2 * self.m + self.p)

    @property
    def z(self) -> slice:
        return slice(self.n + 2 * self.m + self.p, self.n + 2 * self.m + 2 * self.p)

    @property
    def t(self) -> slice:
        return slice(self.n + 2 * self.m + 2 * self.p, self.total)

    def pack(self, point: SolverPoint) -> np.ndarray:
        return np.concatenate([point.x, point.r, point.s, point.y, point.z, point.t])

    def unpack(self, w: np.ndarray) -> SolverPoint:
        return SolverPoint(
            w[self.x].copy(), w[self.r].copy(), w[self.s].copy(),
            w[self.y].copy(), w[self.z].copy(), w[self.t].copy(),
        )


def residual(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    cache: Optional[EvalCache] = None,
) -> np.ndarray:
    """Stacked stationarity residual at the given iterate."""
    if cache is None:
        cache = evaluate(model, point.x, theta, point.y, point.z)
    lay = Layout(model.n, model.m, model.p)
    R = np.empty(lay.total)
    R[lay.x] = cache.c_x + cache.g_x.T @ point.y + cache.h_x.T @ point.z
    R[lay.r] = outer.lam + outer.rho * point.r - point.y
    R[lay.s] = -point.z - point.t
    R[lay.y] = cache.g - point.r
    R[lay.z] = cache.h - point.s
    R[lay.t] = cone_product(point.s, point.t, model.cone) - outer.kappa * cone_target(model.cone)
    return R


def full_jacobian(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    reg: RegularizationState = RegularizationState(),
    cache: Optional[EvalCache] = None,
) -> np.ndarray:
    """Jacobian of the residual with respect to w, with the primal shift
    eps_p on the (x, r, s) diagonals and the dual shift eps_d on (y, z, t)."""
    if cache is None:
        cache = evaluate(model, point.x, theta, point.y, point.z)
    lay = Layout(model.n, model.m, model.p)
    n, m, p = lay.n, lay.m, lay.p
    ep, ed = reg.eps_p, reg.eps_d
    J = np.zeros((lay.total, lay.total))
    J[lay.x, lay.x] = cache.L_xx + ep * np.eye(n)
    J[lay.x, lay.y] = cache.g_x.T
    J[lay.x, lay.z] = cache.h_x.T
    J[lay.r, lay.r] = (outer.rho + ep) * np.eye(m)
    J[lay.r, lay.y] = -np.eye(m)
    J[lay.s, lay.s] = ep * np.eye(p)
    J[lay.s, lay.z] = -np.eye(p)
    J[lay.s, lay.t] = -np.eye(p)
    J[lay.y, lay.x] = cache.g_x
    J[lay.y, lay.r] = -np.eye(m)
    J[lay.y, lay.y] = -ed * np.eye(m)
    J[lay.z, lay.x] = cache.h_x
    J[lay.z, lay.s] = -np.eye(p)
    J[lay.z, lay.z] = -ed * np.eye(p)
    Ps, Pt = cone_product_jacobians(point.s, point.t, model.cone)
    J[lay.t, lay.s] = Ps
    J[lay.t, lay.t] = Pt - ed * np.eye(p)
    return J


@dataclass
class ReducedSystem:
    """Symmetric reduction of the Newton system to (dx, dy, dz).

    K is built from one triangle so it is bitwise symmetric. The cone block
    uses the symmetrized W^{-1}(P_t - eps_d I); on second-order segments that
    operator is nonsymmetric away from the central path, which is why
    directions are refined against the full Jacobian afterwards.
    """

    layout: Layout
    K: np.ndarray
    rhs: np.ndarray
    eps_p: float
    eps_d: float
    dual_scale: float  # 1 / (rho + eps_p)
    W_blocks: List[Tuple[slice, str, np.ndarray]]
    Ptb: np.ndarray  # P_t - eps_d I

    def apply_W_inverse(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for sl, kind, blk in self.W_blocks:
            if kind == "diag":
                out[sl] = v[sl] / blk if v.ndim == 1 else v[sl] / blk[:, None]
            else:
                try:
                    out[sl] = np.linalg.solve(blk, v[sl])
                except np.linalg.LinAlgError as exc:
                    raise NumericalFailure(f"singular cone block: {exc}") from exc
        return out

    def reduce_rows(self, rows: np.ndarray) -> np.ndarray:
        """Right-hand side of the reduced system for residual rows L,
        so that K u = reduce_rows(L) solves the eliminated J dw = -L."""
        lay = self.layout
        Ly = rows[lay.y] + self.dual_scale * rows[lay.r]
        Lz = rows[lay.z] + self.apply_W_inverse(self.Ptb @ rows[lay.s] + rows[lay.t])
        return -np.concatenate([rows[lay.x], Ly, Lz])

    def recover(self, sol: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Expand a reduced solution to the full direction for rows L.

        The relaxation, slack, and complement blocks are eliminated exactly,
        so rows r, s, t (and y, given the reduced solve) of J dw = -L hold to
        round-off regardless of the cone symmetrization."""
        lay = self.layout
        n, m = lay.n, lay.m
        dx, dy, dz = sol[:n], sol[n : n + m], sol[n + m :]
        dw = np.empty(lay.total)
        dw[lay.x] = dx
        dw[lay.y] = dy
        dw[lay.z] = dz
        dw[lay.r] = (dy - rows[lay.r]) * self.dual_scale
        ds = self.apply_W_inverse(self.Ptb @ (dz - rows[lay.s]) - rows[lay.t])
        dw[lay.s] = ds
        dw[lay.t] = self.eps_p * ds - dz + rows[lay.s]
        return dw


def assemble_symmetric(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    reg: RegularizationState = RegularizationState(),
    cache: Optional[EvalCache] = None,
    rows: Optional[np.ndarray] = None,
) -> ReducedSystem:
    """Assemble the reduced saddle system and its right-hand side."""
    if cache is None:
        cache = evaluate(model, point.x, theta, point.y, point.z)
    lay = Layout(model.n, model.m, model.p)
    n, m, p = lay.n, lay.m, lay.p
    ep, ed = reg.eps_p, reg.eps_d
    dual_scale = 1.0 / (outer.rho + ep)

    Ps, Pt = cone_product_jacobians(point.s, point.t, model.cone)
    Ptb = Pt - ed * np.eye(p)
    blocks: List[Tuple[slice, str, np.ndarray]] = []
    Msym = np.zeros((p, p))
    for seg, sl in model.cone.slices():
        Wb = Ps[sl, sl] + ep * Ptb[sl, sl]
        if not (isinstance(seg, SecondOrder) and seg.dim >= 2):
            wd = np.diag(Wb).copy()
            if np.any(wd == 0.0):
                raise NumericalFailure("singular orthant cone block")
            blocks.append((sl, "diag", wd))
            Msym[sl, sl] = np.diag(np.diag(Ptb[sl, sl]) / wd)
        else:
            blocks.append((sl, "dense", Wb))
            try:
                M = np.linalg.solve(Wb, Ptb[sl, sl])
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure(f"singular cone block: {exc}") from exc
            Msym[sl, sl] = 0.5 * (M + M.T)

    nr = n + m + p
    K = np.zeros((nr, nr))
    K[:n, :n] = cache.L_xx + ep * np.eye(n)
    K[:n, n : n + m] = cache.g_x.T
    K[n : n + m, :n] = cache.g_x
    K[:n, n + m :] = cache.h_x.T
    K[n + m :, :n] = cache.h_x
    # exact elimination of the relaxation block: the dual shift joins the
    # penalty term on the equality-dual diagonal
    K[n : n + m, n : n + m] = -(dual_scale + ed) * np.eye(m)
    K[n + m :, n + m :] = -(ed * np.eye(p) + Msym)

    rsys = ReducedSystem(
        layout=lay, K=K, rhs=np.zeros(nr), eps_p=ep, eps_d=ed,
        dual_scale=dual_scale, W_blocks=blocks, Ptb=Ptb,
    )
    if rows is None:
        rows = residual(model, point, theta, outer, cache)
    rsys.rhs = rsys.reduce_rows(rows)
    return rsys


@dataclass(frozen=True)
class DirectionOptions:
    inertia: InertiaOptions = InertiaOptions()
    max_refine: int = 10
    refine_tol: float = 1e-12
    consistency_tol: float = 1e-8
    full_fallback: bool = True


@dataclass
class DirectionInfo:
    eps_p: float
    eps_d: float
    refine_passes: int
    used_full_solve: bool
    consistency_error: float


def _refine_against_full(
    lay: Layout,
    J: np.ndarray,
    R: np.ndarray,
    rsys: ReducedSystem,
    fact: Optional[SymmetricFactorization],
    opts: DirectionOptions,
) -> Tuple[np.ndarray, int, bool, float]:
    """Reduced solve plus refinement monitored on the full system.

    The symmetrized cone block makes the one-shot reduced direction inexact
    on second-order segments away from the central path; refinement corrects
    it, and the dense full solve takes over whenever refinement stalls (or
    the factorization failed, fact=None). Returns (dw, passes, used_full,
    error) with error <= consistency_tol * (1 + ||R||_inf), or raises.
    """
    norm_R = np.abs(R).max() if R.size else 0.0
    consistency = opts.consistency_tol * (1.0 + norm_R)
    refine_target = opts.refine_tol * (1.0 + norm_R)

    def consistency_error(dw):
        err = J @ dw + R
        return np.abs(err).max() if err.size else 0.0, err

    best = None
    best_err = np.inf
    err_rows = R
    passes = 0
    if fact is not None:
        try:
            u = solve_refined(fact, rsys.K, rsys.rhs, opts.max_refine, opts.refine_tol)
            best = rsys.recover(u, R)
            best_err, err_rows = consistency_error(best)
            while np.isfinite(best_err) and best_err > refine_target and passes < opts.max_refine:
                u_c = solve_refined(fact, rsys.K, rsys.reduce_rows(err_rows), opts.max_refine, opts.refine_tol)
                trial = best + rsys.recover(u_c, err_rows)
                trial_err, trial_rows = consistency_error(trial)
                passes += 1
                if trial_err < best_err:
                    best, best_err, err_rows = trial, trial_err, trial_rows
                else:
                    break  # refinement stalled; the fallback below decides
        except NumericalFailure:
            best, best_err = None, np.inf

    used_full = False
    acceptable = best is not None and np.isfinite(best_err) and best_err <= consistency
    if not acceptable and opts.full_fallback and lay.total:
        try:
            dw_full = np.linalg.solve(J, -R)
            full_err, _ = consistency_error(dw_full)
            if np.isfinite(full_err) and not (best is not None and best_err < full_err):
                best, best_err = dw_full, full_err
                used_full = True
        except np.linalg.LinAlgError:
            pass
    if best is None or not np.isfinite(best_err) or best_err > consistency:
        raise NumericalFailure(
            f"direction consistency {best_err:.3e} exceeds bound {consistency:.3e}"
        )
    return best, passes, used_full, best_err


def reduced_direction(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    reg: RegularizationState = RegularizationState(),
    opts: DirectionOptions = DirectionOptions(),
    cache: Optional[EvalCache] = None,
) -> Tuple[SolverPoint, DirectionInfo]:
    """Newton direction through the symmetric reduction at fixed shifts.

    Unlike search_direction this performs no inertia correction: the shifts
    in ``reg`` are used as given (zero by default), so the result is the
    plain Newton direction delivered by the reduction-and-refinement path.
    """
    if cache is None:
        cache = evaluate(model, point.x, theta, point.y, point.z)
    lay = Layout(model.n, model.m, model.p)
    R = residual(model, point, theta, outer, cache)
    rsys = assemble_symmetric(model, point, theta, outer, reg, cache, R)
    try:
        fact = factorize(rsys.K)
    except NumericalFailure:
        if not opts.full_fallback:
            raise
        fact = None
    J = full_jacobian(model, point, theta, outer, reg, cache)
    best, passes, used_full, best_err = _refine_against_full(lay, J, R, rsys, fact, opts)
    info = DirectionInfo(
        eps_p=reg.eps_p, eps_d=reg.eps_d, refine_passes=passes,
        used_full_solve=used_full, consistency_error=best_err,
    )
    return lay.unpack(best), info


def search_direction(
    model: ProblemModel,
    point: SolverPoint,
    theta: np.ndarray,
    outer: OuterState,
    reg: RegularizationState = RegularizationState(),
    opts: DirectionOptions = DirectionOptions(),
    cache: Optional[EvalCache] = None,
) -> Tuple[SolverPoint, RegularizationState, DirectionInfo]:
    """Newton direction for the stationarity system at the current iterate.

    Regularization is chosen by inertia correction of the reduced system
    (target inertia (n, m+p, 0)); the returned direction satisfies
    ||J dw + R||_inf <= consistency_tol * (1 + ||R||_inf) for the Jacobian at
    the returned shifts, or NumericalFailure is raised.
    """
    if cache is None:
        cache = evaluate(model, point.x, theta, point.y, point.z)
    lay = Layout(model.n, model.m, model.p)
    R = residual(model, point, theta, outer, cache)

    holder: dict = {}

    def build(ep, ed):
        rsys = assemble_symmetric(
            model, point, theta, outer,
            RegularizationState(ep, ed, reg.last_eps_p), cache, R,
        )
        holder["rsys"] = rsys
        return rsys.K

    target = (lay.n, lay.m + lay.p, 0)
    fact, reg_new = correct_inertia(build, target, reg, opts.inertia)
    rsys: ReducedSystem = holder["rsys"]
    assert (rsys.eps_p, rsys.eps_d) == (reg_new.eps_p, reg_new.eps_d)

    J = full_jacobian(model, point, theta, outer, reg_new, cache)
    best, passes, used_full, best_err = _refine_against_full(lay, J, R, rsys, fact, opts)
    info = DirectionInfo(
        eps_p=reg_new.eps_p, eps_d=reg_new.eps_d, refine_passes=passes,
        used_full_solve=used_full, consistency_error=best_err,
    )
    return lay.unpack(best), reg_new, info
