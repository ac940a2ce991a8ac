"""Symmetric indefinite factorization, refined solves, and inertia correction.

Factorization is LAPACK Bunch-Kaufman (scipy.linalg.ldl); inertia is read off
the signs of the 1x1 pivots and the eigenvalues of the 2x2 pivot blocks. The
correction loop shifts the primal diagonal by eps_p and the dual diagonal by
eps_d until the factorization reports the requested inertia, following the
standard interior-point heuristic (first trial 1e-4, grow by 8, grow by 100
until the first successful correction, shrink start by 1/3 on reuse).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import ldl, solve_triangular


class NumericalFailure(RuntimeError):
    """A factorization or solve produced non-finite or unusable results."""


class InertiaCorrectionFailure(RuntimeError):
    """Regularization exceeded its cap without reaching the target inertia."""


@dataclass
class SymmetricFactorization:
    """LDL' factors of a symmetric matrix plus its inertia (pos, neg, zero)."""

    matrix: np.ndarray
    inertia: Tuple[int, int, int]
    _lower: np.ndarray
    _perm: np.ndarray
    _blocks: List[Tuple[int, np.ndarray]]  # (start index, 1x1 or 2x2 pivot)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Single triangular sweep; rhs may be a vector or matrix."""
        b = np.asarray(rhs, dtype=float)
        y = solve_triangular(self._lower, b[self._perm], lower=True, unit_diagonal=True)
        for start, blk in self._blocks:
            if blk.shape == (1, 1):
                if blk[0, 0] == 0.0:
                    raise NumericalFailure("zero pivot in factorization")
                y[start] = y[start] / blk[0, 0]
            else:
                det = blk[0, 0] * blk[1, 1] - blk[0, 1] * blk[1, 0]
                if det == 0.0:
                    raise NumericalFailure("singular 2x2 pivot in factorization")
                b0 = y[start].copy()
                b1 = y[start + 1].copy()
                y[start] = (blk[1, 1] * b0 - blk[0, 1] * b1) / det
                y[start + 1] = (-blk[1, 0] * b0 + blk[0, 0] * b1) / det
        y = solve_triangular(self._lower.T, y, lower=False, unit_diagonal=True)
        out = np.empty_like(y)
        out[self._perm] = y
        if not np.all(np.isfinite(out)):
            raise NumericalFailure("non-finite solve result")
        return out


def factorize(K: np.ndarray, zero_tol: Optional[float] = None) -> SymmetricFactorization:
    """Factor a symmetric matrix and report its inertia.

    ``zero_tol`` is the pivot-eigenvalue magnitude below which a direction is
    counted as zero. The default (1e-11) is absolute, not norm-relative:
    structural singularities factor to pivots near round-off of the dependent
    entries, while badly column-scaled saddle systems carry legitimate pivots
    down to the dual regularization scale (1e-8) next to huge barrier entries,
    which a norm-proportional threshold would misread as zero. Pass an
    explicit tolerance for matrices scaled outside that regime.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n):
        raise NumericalFailure(f"matrix is not square: {K.shape}")
    if not np.all(np.isfinite(K)):
        raise NumericalFailure("non-finite matrix entry")
    if zero_tol is None:
        zero_tol = 1e-11
    if n == 0:
        return SymmetricFactorization(K, (0, 0, 0), K.copy(), np.arange(0), [])
    try:
        lu, d, perm = ldl(K, lower=True)
    except Exception as exc:  # LAPACK failures surface as LinAlgError/ValueError
        raise NumericalFailure(f"factorization failed: {exc}") from exc
    if not (np.all(np.isfinite(lu)) and np.all(np.isfinite(d))):
        raise NumericalFailure("non-finite factorization")
    lower = lu[perm]
    blocks: List[Tuple[int, np.ndarray]] = []
    pos = neg = zero = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            blk = d[i : i + 2, i : i + 2].copy()
            # eigenvalues of a symmetric 2x2 block
            mean = 0.5 * (blk[0, 0] + blk[1, 1])
            rad = np.hypot(0.5 * (blk[0, 0] - blk[1, 1]), blk[0, 1])
            eigs = (mean - rad, mean + rad)
            blocks.append((i, blk))
            i += 2
        else:
            eigs = (d[i, i],)
            blocks.append((i, d[i : i + 1, i : i + 1].copy()))
            i += 1
        for ev in eigs:
            if abs(ev) <= zero_tol:
                zero += 1
            elif ev > 0.0:
                pos += 1
            else:
                neg += 1
    return SymmetricFactorization(K, (pos, neg, zero), lower, perm, blocks)


def solve_refined(
    fact: SymmetricFactorization,
    K: np.ndarray,
    rhs: np.ndarray,
    max_refine: int = 10,
    tol: float = 1e-12,
) -> np.ndarray:
    """Solve K x = rhs with iterative refinement.

    The residual is measured against the ``K`` passed in, which may differ
    from the factored matrix (the factors then act as a preconditioner).
    Returns the iterate with the smallest residual seen; raises
    NumericalFailure if that residual is not finite.
    """
    rhs = np.asarray(rhs, dtype=float)
    scale = 1.0 + (np.abs(rhs).max() if rhs.size else 0.0)
    x = fact.solve(rhs)
    best = x
    best_err = np.inf
    for _ in range(max_refine + 1):
        res = K @ x - rhs
        err = np.abs(res).max() if res.size else 0.0
        if err < best_err:
            best, best_err = x, err
        if err <= tol * scale:
            break
        x = x - fact.solve(res)
    if not np.isfinite(best_err):
        raise NumericalFailure("refinement produced non-finite residual")
    return best


@dataclass(frozen=True)
class RegularizationState:
    """Current primal/dual shifts plus the last successful primal shift."""

    eps_p: float = 0.0
    eps_d: float = 0.0
    last_eps_p: float = 0.0


@dataclass(frozen=True)
class InertiaOptions:
    eps_p_init: float = 1e-4
    eps_p_min: float = 1e-20
    eps_p_max: float = 1e40
    grow_first: float = 100.0
    grow: float = 8.0
    shrink: float = 1.0 / 3.0
    dual_shift: float = 1e-8


def correct_inertia(
    assemble: Callable[[float, float], np.ndarray],
    target: Tuple[int, int, int],
    reg: RegularizationState,
    opts: InertiaOptions = InertiaOptions(),
) -> Tuple[SymmetricFactorization, RegularizationState]:
    """Find shifts (eps_p, eps_d) whose assembled matrix has ``target`` inertia.

    ``assemble(eps_p, eps_d)`` must return the shifted symmetric matrix. The
    unshifted matrix is tried first; a zero eigenvalue count switches on the
    dual shift; the primal shift then escalates until the target inertia is
    reached or the cap is exceeded.
    """

    def try_factor(ep, ed):
        try:
            return factorize(assemble(ep, ed))
        except NumericalFailure:
            return None

    fact = try_factor(0.0, 0.0)
    if fact is not None and fact.inertia == target:
        return fact, RegularizationState(0.0, 0.0, reg.last_eps_p)

    eps_d = opts.dual_shift if (fact is None or fact.inertia[2] > 0) else 0.0
    first_ever = reg.last_eps_p == 0.0
    if first_ever:
        eps_p = opts.eps_p_init
    else:
        eps_p = max(opts.eps_p_min, opts.shrink * reg.last_eps_p)
    while eps_p <= opts.eps_p_max:
        fact = try_factor(eps_p, eps_d)
        if fact is not None and fact.inertia == target:
            return fact, RegularizationState(eps_p, eps_d, eps_p)
        if eps_d == 0.0 and (fact is None or fact.inertia[2] > 0):
            eps_d = opts.dual_shift
            continue  # retry the same eps_p with the dual shift on
        eps_p *= opts.grow_first if first_ever else opts.grow
    raise InertiaCorrectionFailure(
        f"no inertia {target} for eps_p up to {opts.eps_p_max:g} (eps_d={eps_d:g})"
    )
