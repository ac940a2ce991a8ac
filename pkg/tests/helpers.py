"""Shared random instance generators for the solver test suites."""

import numpy as np

from ipal.cone import ConeSpec, Orthant, SecondOrder
from ipal.kkt import OuterState, SolverPoint
from ipal.model import ProblemModel


def random_cone(rng, max_dim=5):
    """Mix of orthant and dim-2/3 second-order segments, total dim <= max_dim."""
    segs = []
    remaining = int(rng.integers(1, max_dim + 1))
    while remaining > 0:
        kind = rng.random()
        if kind < 0.5 or remaining < 2:
            d = int(rng.integers(1, remaining + 1))
            segs.append(Orthant(d))
        else:
            d = int(rng.integers(2, min(3, remaining) + 1))
            segs.append(SecondOrder(d))
        remaining -= d
    return ConeSpec(tuple(segs))


def random_interior(rng, spec, scale=1.0):
    v = np.empty(spec.dim)
    for seg, sl in spec.slices():
        if isinstance(seg, SecondOrder) and seg.dim >= 2:
            tail = 0.5 * scale * rng.standard_normal(seg.dim - 1)
            v[sl.start] = np.linalg.norm(tail) + rng.uniform(0.2, 1.2) * scale
            v[sl.start + 1 : sl.stop] = tail
        else:
            v[sl] = rng.uniform(0.3, 1.5, seg.dim) * scale
    return v


def random_nlp(rng, n, m, cone):
    """Quadratic objective with quadratically nonlinear constraints, so the
    Lagrangian Hessian carries constraint curvature."""
    p = cone.dim
    Q = rng.standard_normal((n, n))
    Q = 0.5 * (Q + Q.T)
    q = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    Gq = np.array([0.5 * (M + M.T) for M in 0.3 * rng.standard_normal((m, n, n))]).reshape(m, n, n)
    C = rng.standard_normal((p, n))
    e = rng.standard_normal(p)
    Hq = np.array([0.5 * (M + M.T) for M in 0.3 * rng.standard_normal((p, n, n))]).reshape(p, n, n)

    return ProblemModel(
        n=n,
        m=m,
        p=p,
        cone=cone,
        objective=lambda x, th: 0.5 * x @ Q @ x + q @ x,
        objective_gradient=lambda x, th: Q @ x + q,
        equality=lambda x, th: A @ x - b + 0.5 * np.einsum("i,kij,j->k", x, Gq, x),
        equality_jacobian=lambda x, th: A + np.einsum("kij,j->ki", Gq, x),
        cone_constraint=lambda x, th: C @ x - e + 0.5 * np.einsum("i,kij,j->k", x, Hq, x),
        cone_jacobian=lambda x, th: C + np.einsum("kij,j->ki", Hq, x),
        lagrangian_hessian=lambda x, th, y, z: Q
        + np.einsum("k,kij->ij", y, Gq)
        + np.einsum("k,kij->ij", z, Hq),
    )


def random_iterate(rng, model):
    """Random iterate with strictly interior cone blocks."""
    point = SolverPoint(
        x=rng.standard_normal(model.n),
        r=rng.standard_normal(model.m),
        s=random_interior(rng, model.cone),
        y=rng.standard_normal(model.m),
        z=rng.standard_normal(model.p),
        t=random_interior(rng, model.cone),
    )
    outer = OuterState(
        lam=rng.standard_normal(model.m),
        rho=float(rng.uniform(0.5, 5.0)),
        kappa=float(rng.uniform(0.1, 1.0)),
    )
    return point, outer


def finite_difference_residual_jacobian(model, point, theta, outer, step=1e-6):
    """Central differences of the stacked residual with respect to w."""
    from ipal.kkt import Layout, residual

    lay = Layout(model.n, model.m, model.p)
    w0 = lay.pack(point)
    J = np.zeros((lay.total, lay.total))
    for j in range(lay.total):
        hj = step * (1.0 + abs(w0[j]))
        wp = w0.copy(); wp[j] += hj
        wm = w0.copy(); wm[j] -= hj
        Rp = residual(model, lay.unpack(wp), theta, outer)
        Rm = residual(model, lay.unpack(wm), theta, outer)
        J[:, j] = (Rp - Rm) / (2.0 * hj)
    return J
