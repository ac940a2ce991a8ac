import numpy as np
import pytest

from helpers import (
    finite_difference_residual_jacobian,
    random_cone,
    random_iterate,
    random_nlp,
)
from ipal.cone import ConeSpec, Orthant
from ipal.kkt import (
    Layout,
    OuterState,
    SolverPoint,
    assemble_symmetric,
    full_jacobian,
    reduced_direction,
    residual,
    search_direction,
)
from ipal.linsolve import RegularizationState
from ipal.model import ProblemModel, evaluate


def scalar_model(curvature=2.0):
    """min 0.5*curvature*x^2, unconstrained."""
    return ProblemModel(
        n=1,
        m=0,
        p=0,
        cone=ConeSpec(),
        objective=lambda x, th: 0.5 * curvature * float(x[0] ** 2),
        objective_gradient=lambda x, th: curvature * x,
        lagrangian_hessian=lambda x, th, y, z: curvature * np.eye(1),
    )


def equality_model():
    """min 0.5*x^2 s.t. x - 1 = 0."""
    return ProblemModel(
        n=1,
        m=1,
        p=0,
        cone=ConeSpec(),
        objective=lambda x, th: 0.5 * float(x[0] ** 2),
        objective_gradient=lambda x, th: x,
        equality=lambda x, th: x - 1.0,
        equality_jacobian=lambda x, th: np.eye(1),
        lagrangian_hessian=lambda x, th, y, z: np.eye(1),
    )


def empty_point(model):
    return SolverPoint(
        x=np.zeros(model.n), r=np.zeros(model.m), s=np.ones(model.p),
        y=np.zeros(model.m), z=np.zeros(model.p), t=np.ones(model.p),
    )


class TestResidualJacobian:
    def test_scalar_jacobian_example(self):
        model = scalar_model(curvature=2.0)
        point = empty_point(model)
        outer = OuterState(lam=np.zeros(0), rho=1.0, kappa=1.0)
        J = full_jacobian(model, point, np.zeros(0), outer, RegularizationState(eps_p=0.5))
        assert J.shape == (1, 1)
        assert J[0, 0] == pytest.approx(2.5)

    def test_residual_rows(self):
        model = equality_model()
        point = SolverPoint(
            x=np.array([2.0]), r=np.array([0.5]), s=np.zeros(0),
            y=np.array([0.25]), z=np.zeros(0), t=np.zeros(0),
        )
        outer = OuterState(lam=np.array([0.1]), rho=2.0, kappa=1.0)
        R = residual(model, point, np.zeros(0), outer)
        # rows: x + y, lam + rho*r - y, (g - r)
        assert np.allclose(R, [2.25, 0.85, 0.5])

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        for _ in range(30):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(0, 5))
            model = random_nlp(rng, n, m, random_cone(rng))
            point, outer = random_iterate(rng, model)
            J = full_jacobian(model, point, np.zeros(0), outer)
            J_fd = finite_difference_residual_jacobian(model, point, np.zeros(0), outer)
            err = np.abs(J - J_fd).max() / (1.0 + np.abs(J).max())
            assert err <= 1e-5


class TestSymmetricReduction:
    def test_orthant_cone_block_value(self):
        # p=1 orthant, s=2, t=0.5, no shifts: cone block is -s/t = -4
        model = ProblemModel(
            n=1,
            m=0,
            p=1,
            cone=ConeSpec((Orthant(1),)),
            objective=lambda x, th: 0.0,
            objective_gradient=lambda x, th: np.zeros(1),
            cone_constraint=lambda x, th: x.copy(),
            cone_jacobian=lambda x, th: np.eye(1),
            lagrangian_hessian=lambda x, th, y, z: np.zeros((1, 1)),
        )
        point = SolverPoint(
            x=np.zeros(1), r=np.zeros(0), s=np.array([2.0]),
            y=np.zeros(0), z=np.zeros(1), t=np.array([0.5]),
        )
        outer = OuterState(lam=np.zeros(0), rho=1.0, kappa=1.0)
        rsys = assemble_symmetric(model, point, np.zeros(0), outer)
        assert rsys.K[1, 1] == pytest.approx(-4.0)

    def test_K_bitwise_symmetric(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            model = random_nlp(rng, int(rng.integers(2, 6)), int(rng.integers(0, 4)), random_cone(rng))
            point, outer = random_iterate(rng, model)
            reg = RegularizationState(eps_p=float(rng.uniform(0, 1e-3)), eps_d=float(rng.uniform(0, 1e-6)))
            rsys = assemble_symmetric(model, point, np.zeros(0), outer, reg)
            assert np.array_equal(rsys.K, rsys.K.T)

    def test_recovered_rows_exact(self):
        # scalar equality problem: row 4 of the full system holds exactly,
        # including a nonzero dual shift
        model = equality_model()
        point = SolverPoint(
            x=np.array([2.0]), r=np.array([0.5]), s=np.zeros(0),
            y=np.array([0.25]), z=np.zeros(0), t=np.zeros(0),
        )
        outer = OuterState(lam=np.array([0.1]), rho=2.0, kappa=1.0)
        reg = RegularizationState(eps_p=1e-4, eps_d=1e-6)
        R = residual(model, point, np.zeros(0), outer)
        rsys = assemble_symmetric(model, point, np.zeros(0), outer, reg)
        sol = np.linalg.solve(rsys.K, rsys.rhs)
        dw = rsys.recover(sol, R)
        lay = Layout(1, 1, 0)
        cache = evaluate(model, point.x, np.zeros(0), point.y, point.z)
        row4 = cache.g_x @ dw[lay.x] - dw[lay.r] - reg.eps_d * dw[lay.y]
        assert row4[0] == pytest.approx(-R[lay.y][0], abs=1e-14)

    def test_reduction_matches_full_solve(self):
        # the one-shot symmetrized solve is inexact on second-order segments
        # away from the central path; the reduction path restores the exact
        # direction through refinement or the dense fallback
        rng = np.random.default_rng(12)
        refined = fallbacks = 0
        for _ in range(50):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(0, 5))
            model = random_nlp(rng, n, m, random_cone(rng))
            point, outer = random_iterate(rng, model)
            R = residual(model, point, np.zeros(0), outer)
            J = full_jacobian(model, point, np.zeros(0), outer)
            dw_full = np.linalg.solve(J, -R)
            delta, info = reduced_direction(model, point, np.zeros(0), outer)
            lay = Layout(n, m, model.p)
            dw = lay.pack(delta)
            rel = np.abs(dw - dw_full).max() / (1.0 + np.abs(dw_full).max())
            assert rel <= 1e-8
            assert np.abs(J @ dw + R).max() <= 1e-8 * (1.0 + np.abs(R).max())
            refined += info.refine_passes > 0
            fallbacks += info.used_full_solve
        # the polishing machinery must actually fire on these draws
        assert refined + fallbacks > 0


class TestSearchDirection:
    def test_consistency_with_returned_shifts(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(0, 5))
            model = random_nlp(rng, n, m, random_cone(rng))
            point, outer = random_iterate(rng, model)
            delta, reg, info = search_direction(model, point, np.zeros(0), outer)
            R = residual(model, point, np.zeros(0), outer)
            J = full_jacobian(model, point, np.zeros(0), outer, reg)
            lay = Layout(n, m, model.p)
            err = np.abs(J @ lay.pack(delta) + R).max()
            assert err <= 1e-8 * (1.0 + np.abs(R).max())
            assert info.consistency_error <= 1e-8 * (1.0 + np.abs(R).max())

    def test_indefinite_hessian_gets_shifted(self):
        model = scalar_model(curvature=-1.0)
        point = empty_point(model)
        point.x = np.array([1.0])
        outer = OuterState(lam=np.zeros(0), rho=1.0, kappa=1.0)
        delta, reg, info = search_direction(model, point, np.zeros(0), outer)
        assert info.eps_p > 0.0
        assert reg.last_eps_p == info.eps_p

    def test_convex_qp_newton_solves_subproblem_fast(self):
        # strictly convex equality QP from an interior start: the stationarity
        # system is affine, so a couple of Newton steps drive the residual to
        # round-off
        model = equality_model()
        point = SolverPoint(
            x=np.array([3.0]), r=np.array([2.0]), s=np.zeros(0),
            y=np.array([0.0]), z=np.zeros(0), t=np.zeros(0),
        )
        outer = OuterState(lam=np.zeros(1), rho=1.0, kappa=1.0)
        lay = Layout(1, 1, 0)
        for _ in range(3):
            delta, _, _ = search_direction(model, point, np.zeros(0), outer)
            point = lay.unpack(lay.pack(point) + lay.pack(delta))
        R = residual(model, point, np.zeros(0), outer)
        assert np.abs(R).max() <= 1e-12

    def test_zero_regularization_kept_when_inertia_correct(self):
        model = equality_model()
        point = SolverPoint(
            x=np.array([3.0]), r=np.array([2.0]), s=np.zeros(0),
            y=np.array([0.0]), z=np.zeros(0), t=np.zeros(0),
        )
        outer = OuterState(lam=np.zeros(1), rho=1.0, kappa=1.0)
        _, reg, info = search_direction(model, point, np.zeros(0), outer)
        assert info.eps_p == 0.0 and info.eps_d == 0.0
