import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from tailsitter.equilibria import linearize_analytic_hover
from tailsitter.lqr import (
    LqrWeights,
    NotStabilizable,
    augment_integrator,
    care_residual,
    expand_gain_with_scalar_part,
    hover_lqr,
    lyapunov_value,
    solve_care,
    solve_lyapunov,
    stabilizing_gain,
)


@pytest.fixture(scope="module")
def hover_model(params):
    return linearize_analytic_hover(params)


class TestLyapunov:
    def test_matches_scipy(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(5, 5)) - 4 * np.eye(5)
        Q = np.eye(5)
        X = solve_lyapunov(A, Q)
        np.testing.assert_allclose(X, scipy.linalg.solve_continuous_lyapunov(A.T, -Q), rtol=1e-10)

    def test_residual(self):
        A = np.array([[0.0, 1.0], [-2.0, -3.0]])
        X = solve_lyapunov(A, np.eye(2))
        np.testing.assert_allclose(A.T @ X + X @ A + np.eye(2), 0.0, atol=1e-12)


class TestCare:
    def test_scalar(self):
        # a = 1, b = 1, q = r = 1: s = 1 + sqrt(2)
        d = solve_care(np.array([[1.0]]), np.array([[1.0]]), LqrWeights(np.eye(1), np.eye(1)))
        assert d.S[0, 0] == pytest.approx(1 + np.sqrt(2), rel=1e-12)
        assert d.K[0, 0] == pytest.approx(1 + np.sqrt(2), rel=1e-12)

    def test_double_integrator(self):
        # closed form: S = [[sqrt3, 1], [1, sqrt3]], K = [1, sqrt3]
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        d = solve_care(A, B, LqrWeights(np.eye(2), np.eye(1)))
        r3 = np.sqrt(3)
        np.testing.assert_allclose(d.S, [[r3, 1.0], [1.0, r3]], rtol=1e-12)
        np.testing.assert_allclose(d.K, [[1.0, r3]], rtol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_random_against_scipy(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(4, 4))
        B = rng.normal(size=(4, 2))
        Q = np.diag(rng.uniform(0.1, 2, 4))
        R = np.diag(rng.uniform(0.1, 2, 2))
        d = solve_care(A, B, LqrWeights(Q, R))
        S_ref = scipy.linalg.solve_continuous_are(A, B, Q, R)
        np.testing.assert_allclose(d.S, S_ref, rtol=1e-7, atol=1e-9)

    def test_cross_term_against_scipy(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(3, 3))
        B = rng.normal(size=(3, 2))
        Q, R = 2 * np.eye(3), np.eye(2)
        N = 0.1 * rng.normal(size=(3, 2))
        d = solve_care(A, B, LqrWeights(Q, R, N))
        np.testing.assert_allclose(d.S, scipy.linalg.solve_continuous_are(A, B, Q, R, s=N), rtol=1e-8)

    def test_hover_design(self, hover_model):
        w = LqrWeights(np.eye(12), np.eye(4))
        d = solve_care(hover_model.A, hover_model.B, w)
        res = care_residual(hover_model.A, hover_model.B, w, d.S)
        assert np.linalg.norm(res) / np.linalg.norm(d.S) < 1e-8
        assert np.max(d.closed_loop_eigs.real) < 0
        np.testing.assert_allclose(d.S, d.S.T, atol=1e-10)
        assert np.min(np.linalg.eigvalsh(d.S)) > 0

    def test_uncontrollable_unstable_mode(self):
        A = np.diag([1.0, -1.0])
        B = np.array([[0.0], [1.0]])
        with pytest.raises(NotStabilizable):
            solve_care(A, B, LqrWeights(np.eye(2), np.eye(1)))

    def test_bad_initial_gain(self):
        with pytest.raises(NotStabilizable):
            solve_care(np.eye(1), np.eye(1), LqrWeights(np.eye(1), np.eye(1)), K0=np.zeros((1, 1)))

    def test_stabilizing_gain_with_fast_stable_mode(self):
        A = np.diag([-5.0, 1.0])
        B = np.array([[1.0], [1.0]])
        K = stabilizing_gain(A, B)
        assert np.max(np.linalg.eigvals(A - B @ K).real) < 0

    def test_stabilizing_gain(self, hover_model):
        K = stabilizing_gain(hover_model.A, hover_model.B)
        assert np.max(np.linalg.eigvals(hover_model.A - hover_model.B @ K).real) < 0


class TestWeights:
    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            LqrWeights(-np.eye(2), np.eye(1))
        with pytest.raises(ValueError):
            LqrWeights(np.eye(2), np.zeros((1, 1)))


class TestStructure:
    def test_scalar_column_is_zero(self, hover_model):
        d = solve_care(hover_model.A, hover_model.B, LqrWeights(np.eye(12), np.eye(4)))
        K13 = expand_gain_with_scalar_part(d.K)
        assert K13.shape == (4, 13)
        np.testing.assert_array_equal(K13[:, 6], 0.0)

    def test_augment_dimensions(self, hover_model):
        A, B = augment_integrator(hover_model.A, hover_model.B)
        assert A.shape == (15, 15) and B.shape == (15, 4)
        np.testing.assert_array_equal(A[12:, 0:3], -np.eye(3))
        np.testing.assert_array_equal(B[12:], 0.0)

    def test_integrator_design_stable(self, hover_model):
        lm = hover_model
        eq = lm.equilibrium
        h = hover_lqr(lm.A, lm.B, eq.x_eq, eq.u_eq, LqrWeights(np.eye(15), np.eye(4)), integrator=True)
        assert h.K_i.shape == (4, 3)
        assert np.max(h.design.closed_loop_eigs.real) < 0


class TestLyapunovValue:
    @pytest.fixture
    def ctl(self, hover_model):
        lm = hover_model
        eq = lm.equilibrium
        return hover_lqr(lm.A, lm.B, eq.x_eq, eq.u_eq, LqrWeights(np.eye(12), np.eye(4)))

    def test_zero_at_equilibrium(self, ctl):
        assert ctl.value(ctl.x_eq, np.zeros(3)) == 0.0

    def test_target_shift(self, ctl):
        x = ctl.x_eq.copy()
        x[0:3] = [1.0, 2.0, 3.0]
        assert ctl.value(x, np.array([1.0, 2.0, 3.0])) == pytest.approx(0.0, abs=1e-20)

    def test_positive_and_sign_invariant(self, ctl):
        x = ctl.x_eq.copy()
        x[3] = 0.5
        assert ctl.value(x, np.zeros(3)) > 0
        y = x.copy()
        y[6:10] = -y[6:10]
        assert ctl.value(y, np.zeros(3)) == pytest.approx(ctl.value(x, np.zeros(3)))

    def test_quadratic(self, ctl):
        dx = np.linspace(-1, 1, 12)
        S = ctl.design.S
        assert lyapunov_value(S, 2 * dx) == pytest.approx(4 * lyapunov_value(S, dx))

    def test_command_at_equilibrium(self, ctl):
        np.testing.assert_allclose(ctl.command(ctl.x_eq, np.zeros(3)), ctl.u_eq)
