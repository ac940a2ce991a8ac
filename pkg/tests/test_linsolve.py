import numpy as np
import pytest

from ipal.linsolve import (
    InertiaCorrectionFailure,
    NumericalFailure,
    RegularizationState,
    correct_inertia,
    factorize,
    solve_refined,
)


def random_symmetric(rng, n):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def known_inertia_matrix(rng, n, n_pos, n_neg):
    """Congruence transform of a signed diagonal: inertia is exact (Sylvester)."""
    signs = np.concatenate(
        [np.ones(n_pos), -np.ones(n_neg), np.zeros(n - n_pos - n_neg)]
    )
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    mags = rng.uniform(0.5, 2.0, n) * signs
    return (Q * mags) @ Q.T


class TestFactorize:
    def test_solve_matches_numpy(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            K = random_symmetric(rng, n)
            b = rng.standard_normal(n)
            fact = factorize(K)
            x = solve_refined(fact, K, b)
            assert np.abs(K @ x - b).max() <= 1e-10 * (1.0 + np.abs(b).max())

    def test_matrix_rhs(self):
        rng = np.random.default_rng(1)
        K = random_symmetric(rng, 6)
        B = rng.standard_normal((6, 3))
        X = solve_refined(factorize(K), K, B)
        assert np.abs(K @ X - B).max() <= 1e-9

    def test_inertia_exact_on_constructed_matrices(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(2, 10))
            n_pos = int(rng.integers(0, n + 1))
            n_neg = int(rng.integers(0, n - n_pos + 1))
            K = known_inertia_matrix(rng, n, n_pos, n_neg)
            fact = factorize(K)
            assert fact.inertia == (n_pos, n_neg, n - n_pos - n_neg)

    def test_singular_kkt_reports_zero(self):
        rng = np.random.default_rng(3)
        H = random_symmetric(rng, 4) + 4.0 * np.eye(4)
        A = rng.standard_normal((1, 4))
        A2 = np.vstack([A, A])  # duplicated row, no dual shift: singular
        K = np.block([[H, A2.T], [A2, np.zeros((2, 2))]])
        fact = factorize(K)
        assert fact.inertia[2] >= 1

    def test_non_finite_rejected(self):
        with pytest.raises(NumericalFailure):
            factorize(np.array([[np.nan]]))

    def test_refinement_against_other_matrix(self):
        # factors of a nearby matrix act as a preconditioner
        rng = np.random.default_rng(4)
        K = random_symmetric(rng, 8) + 8.0 * np.eye(8)
        K2 = K + 1e-3 * np.eye(8)
        b = rng.standard_normal(8)
        x = solve_refined(factorize(K), K2, b, max_refine=30)
        assert np.abs(K2 @ x - b).max() <= 1e-10 * (1.0 + np.abs(b).max())


class TestCorrectInertia:
    @staticmethod
    def kkt_assemble(H, A):
        def assemble(ep, ed):
            n, m = H.shape[0], A.shape[0]
            return np.block(
                [[H + ep * np.eye(n), A.T], [A, -ed * np.eye(m)]]
            )

        return assemble

    def test_no_shift_when_inertia_correct(self):
        rng = np.random.default_rng(5)
        H = random_symmetric(rng, 4) + 4.0 * np.eye(4)
        A = rng.standard_normal((2, 4))
        fact, reg = correct_inertia(self.kkt_assemble(H, A), (4, 2, 0), RegularizationState())
        assert reg.eps_p == 0.0 and reg.eps_d == 0.0
        assert fact.inertia == (4, 2, 0)

    def test_indefinite_hessian_corrected(self):
        rng = np.random.default_rng(6)
        H = random_symmetric(rng, 4) - 3.0 * np.eye(4)
        A = rng.standard_normal((2, 4))
        fact, reg = correct_inertia(self.kkt_assemble(H, A), (4, 2, 0), RegularizationState())
        assert fact.inertia == (4, 2, 0)
        assert reg.eps_p > 0.0
        assert reg.last_eps_p == reg.eps_p

    def test_duplicated_rows_switch_on_dual_shift(self):
        rng = np.random.default_rng(7)
        H = random_symmetric(rng, 4) + 4.0 * np.eye(4)
        a = rng.standard_normal((1, 4))
        A = np.vstack([a, a])
        fact, reg = correct_inertia(self.kkt_assemble(H, A), (4, 2, 0), RegularizationState())
        assert fact.inertia == (4, 2, 0)
        assert reg.eps_d > 0.0

    def test_reuse_shrinks_first_trial(self):
        H = np.diag([-1e-6, 1.0, 1.0])
        A = np.zeros((0, 3))
        assemble = self.kkt_assemble(H, A)
        fact, reg = correct_inertia(assemble, (3, 0, 0), RegularizationState())
        assert reg.eps_p == pytest.approx(1e-4)
        fact, reg2 = correct_inertia(assemble, (3, 0, 0), reg)
        assert reg2.eps_p == pytest.approx(1e-4 / 3.0)

    def test_unreachable_target_raises(self):
        # adding eps_p only pushes eigenvalues up; an all-negative target fails
        assemble = lambda ep, ed: np.eye(3) + ep * np.eye(3)
        with pytest.raises(InertiaCorrectionFailure):
            correct_inertia(assemble, (0, 3, 0), RegularizationState())
