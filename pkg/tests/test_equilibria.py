import numpy as np
import pytest

from tailsitter.equilibria import (
    FLIGHT_LAYOUT,
    HOVER_LAYOUT,
    NoConvergence,
    hover_equilibrium,
    hover_thrust_scale,
    linearize_analytic_hover,
    linearize_fd,
    trim_level_flight,
    unit_quat_from_reduced,
)
from tailsitter.plant import rk4_step
from tailsitter.vehicle import input_matrices, state_deriv


@pytest.fixture(scope="module")
def trim5(params):
    return trim_level_flight(params, 5.0)


@pytest.fixture(scope="module")
def flight_model(params, trim5):
    return linearize_fd(params, trim5, layout="flight")


class TestHover:
    def test_fixed_point(self, params):
        eq = hover_equilibrium(params, np.array([1.0, -2.0, 3.0]))
        assert eq.residual_norm < 1e-9
        np.testing.assert_array_equal(eq.x_eq[0:3], [1.0, -2.0, 3.0])

    def test_thrust_scale_formula(self, params):
        lam = params.m * params.g / (1 - params.S_wet * params.C_d0 / (4 * params.S_p))
        assert hover_thrust_scale(params) == pytest.approx(lam, rel=1e-15)
        assert hover_thrust_scale(params) > params.m * params.g

    def test_command_in_moment_kernel(self, params):
        _, M_b = input_matrices(params)
        assert np.linalg.norm(M_b @ hover_equilibrium(params).u_eq) < 1e-12

    def test_attitude_per_frame(self, params, params_down):
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(hover_equilibrium(params).x_eq[6:10], [s, 0, -s, 0], atol=1e-15)
        np.testing.assert_allclose(hover_equilibrium(params_down).x_eq[6:10], [s, 0, s, 0], atol=1e-15)

    def test_simplified_model_also_balanced(self, params):
        assert hover_equilibrium(params, model="simplified").residual_norm < 1e-9


class TestHoverLinearization:
    def test_analytic_matches_finite_difference(self, params):
        an = linearize_analytic_hover(params)
        fd = linearize_fd(params, hover_equilibrium(params))
        scale_A = max(1.0, np.abs(an.A).max())
        np.testing.assert_allclose(fd.A, an.A, rtol=1e-6, atol=1e-6 * scale_A)
        np.testing.assert_allclose(fd.B, an.B, rtol=1e-6, atol=1e-6 * np.abs(an.B).max())

    def test_z_down_analytic_matches_finite_difference(self, params_down):
        an = linearize_analytic_hover(params_down)
        fd = linearize_fd(params_down, hover_equilibrium(params_down))
        np.testing.assert_allclose(fd.A, an.A, rtol=1e-6, atol=1e-5)

    def test_kinematic_rows_of_B_are_zero(self, params):
        B = linearize_analytic_hover(params).B
        np.testing.assert_array_equal(B[0:3], 0.0)
        np.testing.assert_array_equal(B[6:9], 0.0)

    def test_vertical_thrust_row(self, params_down):
        # body x maps to -z in the z-down frame, so the vertical row carries -F_b[0]/m
        B = linearize_analytic_hover(params_down).B
        expected = (1 - params_down.k_wet * params_down.C_d0) / params_down.m
        np.testing.assert_allclose(np.abs(B[5, :2]), [expected, expected], rtol=1e-12)

    def test_controllable(self, params):
        lm = linearize_analytic_hover(params)
        A, B = lm.A, lm.B
        blocks = [B]
        for _ in range(11):
            blocks.append(A @ blocks[-1])
        assert np.linalg.matrix_rank(np.hstack(blocks)) == 12

    def test_layout(self, params):
        lm = linearize_analytic_hover(params)
        assert lm.layout == HOVER_LAYOUT
        assert lm.A.shape == (12, 12) and lm.B.shape == (12, 4)


class TestTrim:
    def test_residual(self, trim5):
        assert trim5.residual_norm < 1e-8

    def test_symmetric_pitch_only(self, trim5):
        q = trim5.x_eq[6:10]
        assert q[1] == 0.0 and q[3] == 0.0
        assert q[2] < 0
        u = trim5.u_eq
        assert u[0] == pytest.approx(u[1]) and u[2] == pytest.approx(u[3])

    def test_small_speed_approaches_hover(self, params):
        q = trim_level_flight(params, 0.3).x_eq[6:10]
        np.testing.assert_allclose(q, hover_equilibrium(params).x_eq[6:10], atol=0.05)

    def test_continuation_reaches_cruise(self, params):
        eq = trim_level_flight(params, 20.0)
        assert eq.residual_norm < 1e-8

    def test_open_loop_hold(self, params, trim5):
        x = trim5.x_eq
        for _ in range(500):
            x = rk4_step(x, trim5.u_eq, 1e-3, params)
        assert np.linalg.norm(x[3:6] - trim5.x_eq[3:6]) < 1e-4

    def test_invalid_speed(self, params):
        with pytest.raises(ValueError):
            trim_level_flight(params, 0.0)

    def test_no_convergence_reports_residual(self, params):
        with pytest.raises(NoConvergence) as err:
            trim_level_flight(params, 5.0, max_iter=1)
        assert err.value.residual > 0


class TestFlightLinearization:
    def test_layout(self, flight_model):
        assert flight_model.layout == FLIGHT_LAYOUT
        assert flight_model.A.shape == (10, 10)

    def test_kinematic_rows_of_B_are_zero(self, flight_model):
        B = flight_model.B
        np.testing.assert_allclose(B[0], 0.0, atol=1e-9)
        np.testing.assert_allclose(B[4:7], 0.0, atol=1e-9)

    def test_sign_pattern_of_reference_entries(self, flight_model):
        A, B = flight_model.A, flight_model.B
        # one-based (row, col) entries compared in sign
        for (r, c), ref in {(2, 6): 53.84, (3, 5): -16.76, (3, 7): 10.20, (9, 2): 4.77}.items():
            assert np.sign(A[r - 1, c - 1]) == np.sign(ref)
        for (r, c), ref in {(8, 3): -68.36, (10, 1): -25.58}.items():
            assert np.sign(B[r - 1, c - 1]) == np.sign(ref)

    def test_agrees_with_hover_model_at_hover(self, params):
        eq = hover_equilibrium(params)
        hov = linearize_fd(params, eq)
        fl = linearize_fd(params, eq, layout="flight")
        keep = [2, 3, 4, 5, 6, 7, 8, 9, 10, 11]
        np.testing.assert_allclose(fl.A, hov.A[np.ix_(keep, keep)], atol=1e-9)

    def test_reduced_quaternion(self):
        q = unit_quat_from_reduced(np.array([0.0, 0.6, 0.0]), -1.0)
        np.testing.assert_allclose(q, [-0.8, 0.0, 0.6, 0.0])

    def test_state_deriv_at_trim_small(self, params, trim5):
        assert np.linalg.norm(state_deriv(trim5.x_eq, trim5.u_eq, params)[3:]) < 1e-8
