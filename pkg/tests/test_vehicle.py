import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import exact_input_matrices, rational_constants, symbolic_assembly
from tailsitter.mathkin import normalize
from tailsitter.vehicle import (
    ActuatorLimits,
    augmented_wrench,
    body_wrench,
    effective_from_physical,
    effective_from_virtual,
    elevon_angles,
    input_matrices,
    load_params,
    motor_speed_from_thrust,
    pack_state,
    physical_from_effective,
    primitive_wrench,
    renormalize_state,
    saturate_command,
    simplified_wrench,
    state_deriv,
    thrust_from_motor_speed,
    virtual_from_effective,
)

thrusts = arrays(np.float64, 2, elements=st.floats(0.1, 5.0))
deflections = arrays(np.float64, 2, elements=st.floats(-0.5, 0.5))


class TestInputMatrices:
    def test_ranks(self, params):
        F_b, M_b = input_matrices(params)
        assert np.linalg.matrix_rank(F_b) == 2
        assert np.linalg.matrix_rank(M_b) == 3

    def test_no_lateral_force(self, params):
        F_b, _ = input_matrices(params)
        np.testing.assert_array_equal(F_b[1], np.zeros(4))

    def test_symmetric_thrust_in_moment_kernel(self, params):
        _, M_b = input_matrices(params)
        assert np.linalg.norm(M_b @ [1.0, 1.0, 0.0, 0.0]) < 1e-12

    def test_kernel_is_one_dimensional(self, params):
        _, M_b = input_matrices(params)
        _, s, Vt = np.linalg.svd(M_b)
        null = Vt[-1]
        np.testing.assert_allclose(np.abs(null), np.array([1, 1, 0, 0]) / np.sqrt(2), atol=1e-12)

    def test_axial_entry(self, params):
        F_b, _ = input_matrices(params)
        assert F_b[0, 0] == pytest.approx(1 - params.S_wet * params.C_d0 / (4 * params.S_p))

    @settings(max_examples=50)
    @given(thrusts, deflections)
    def test_factored_form_matches_primitive_sums(self, T, d):
        p = load_params()
        u = np.array([T[0], T[1], d[0] * T[0], d[1] * T[1]])
        F, M = simplified_wrench(u, p)
        Fp, Mp = primitive_wrench(T, d, p)
        np.testing.assert_allclose(F, Fp, rtol=0, atol=1e-12)
        np.testing.assert_allclose(M, Mp, rtol=0, atol=1e-12)

    @settings(max_examples=30)
    @given(thrusts, deflections)
    def test_straight_and_arc_agree_without_side_force(self, T, d):
        p = load_params()
        for a, b in zip(primitive_wrench(T, d, p, "straight"), primitive_wrench(T, d, p, "arc")):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unknown_wing_shape(self, params):
        with pytest.raises(ValueError):
            primitive_wrench(np.ones(2), np.zeros(2), params, "delta")


class TestExactAssembly:
    """Elementary-matrix sums against the factored matrices in rational arithmetic."""

    def test_rational_constants_give_identical_expressions(self, params):
        F, M, Fc, Mc, _ = symbolic_assembly(rational_constants(params))
        assert sp.expand(F - Fc) == sp.zeros(3, 1)
        assert sp.expand(M - Mc) == sp.zeros(3, 1)

    def test_float_matrices_match_rational_assembly(self, params):
        F_exact, M_exact = exact_input_matrices(params)
        F_b, M_b = input_matrices(params)
        np.testing.assert_allclose(F_b, F_exact, rtol=0, atol=1e-12)
        np.testing.assert_allclose(M_b, M_exact, rtol=0, atol=1e-12)


class TestCommandConversions:
    def test_thrust_at_1000_rad_s(self, params):
        assert thrust_from_motor_speed(1000.0, params) == pytest.approx(5.13)

    def test_speed_inverse_and_clamp(self, params):
        lim = ActuatorLimits()
        omega, clamped = motor_speed_from_thrust(np.array([5.13, 100.0, -1.0]), params, lim)
        np.testing.assert_allclose(omega, [1000.0, lim.omega_max, lim.omega_min])
        np.testing.assert_array_equal(clamped, [False, True, True])

    @given(arrays(np.float64, 4, elements=st.floats(-3, 3)))
    def test_virtual_roundtrip(self, up):
        u = effective_from_virtual(up)
        T = u[:2]
        if np.min(np.abs(T)) < 0.05:
            return
        np.testing.assert_allclose(virtual_from_effective(u), up, atol=1e-9)

    def test_elevon_guard_holds_previous(self):
        u = np.array([0.01, 2.0, 0.005, 0.4])
        np.testing.assert_allclose(elevon_angles(u, np.array([0.3, 0.0])), [0.3, 0.2])

    def test_physical_roundtrip(self, params):
        phys = np.array([600.0, 700.0, 0.1, -0.2])
        u = effective_from_physical(phys, params)
        np.testing.assert_allclose(physical_from_effective(u, params), phys, rtol=1e-12)


class TestSaturation:
    def test_position_limits(self):
        lim = ActuatorLimits()
        out = saturate_command(np.array([2000.0, 0.0, 1.0, -1.0]), np.array([1000.0, 200.0, 0.52, -0.52]),
                               1.0, lim)
        np.testing.assert_allclose(out, [lim.omega_max, lim.omega_min, lim.delta_max, -lim.delta_max])

    def test_rate_limits(self):
        lim = ActuatorLimits()
        out = saturate_command(np.array([900.0, 300.0, 0.5, -0.5]), np.array([500.0, 500.0, 0.0, 0.0]),
                               0.01, lim)
        np.testing.assert_allclose(out, [530.0, 470.0, 0.0524, -0.0524])

    def test_inside_limits_untouched(self):
        raw = np.array([500.0, 510.0, 0.01, 0.0])
        out = saturate_command(raw, raw, 1e-3, ActuatorLimits())
        np.testing.assert_array_equal(out, raw)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ActuatorLimits(omega_min=1000.0, omega_max=100.0)
        with pytest.raises(ValueError):
            saturate_command(np.zeros(4), np.zeros(4), 0.0, ActuatorLimits())


class TestAugmentedModel:
    @settings(max_examples=50)
    @given(thrusts, deflections)
    def test_reduces_to_simplified_at_zero_airspeed(self, T, d):
        p = load_params()
        u = np.array([T[0], T[1], d[0] * T[0], d[1] * T[1]])
        F0, M0 = simplified_wrench(u, p)
        F, M = augmented_wrench(virtual_from_effective(u), np.zeros(3), np.zeros(3), p)
        np.testing.assert_allclose(F, F0, atol=1e-12)
        np.testing.assert_allclose(M, M0, atol=1e-12)

    @given(arrays(np.float64, 4, elements=st.floats(-3, 3)),
           arrays(np.float64, 3, elements=st.floats(-30, 30)))
    def test_no_side_force(self, up, vb):
        F, _ = augmented_wrench(up, vb, np.zeros(3), load_params())
        assert F[1] == 0.0

    def test_free_stream_drag_opposes_motion(self, params):
        F, _ = augmented_wrench(np.zeros(4), np.array([10.0, 0, 0]), np.zeros(3), params)
        assert F[0] < 0

    def test_unknown_model(self, params):
        with pytest.raises(ValueError):
            body_wrench(np.zeros(4), np.zeros(3), np.zeros(3), params, "full")


class TestStateDerivative:
    def test_free_fall(self, params):
        x = pack_state(np.zeros(3), np.zeros(3), [1.0, 0, 0, 0], np.zeros(3))
        dx = state_deriv(x, np.zeros(4), params)
        np.testing.assert_allclose(dx[3:6], [0.0, 0.0, -params.g])
        np.testing.assert_array_equal(dx[10:13], np.zeros(3))

    def test_z_down_gravity_sign(self, params_down):
        x = pack_state(np.zeros(3), np.zeros(3), [1.0, 0, 0, 0], np.zeros(3))
        assert state_deriv(x, np.zeros(4), params_down)[5] == pytest.approx(params_down.g)

    def test_gyroscopic_term(self, params):
        w = np.array([1.0, 2.0, 3.0])
        x = pack_state(np.zeros(3), np.zeros(3), [1.0, 0, 0, 0], w)
        J = params.J
        np.testing.assert_allclose(state_deriv(x, np.zeros(4), params)[10:13],
                                   np.linalg.solve(J, -np.cross(w, J @ w)))

    def test_renormalize(self):
        x = pack_state(np.zeros(3), np.zeros(3), [2.0, 0, 0, 0], np.zeros(3))
        np.testing.assert_allclose(renormalize_state(x)[6:10], [1.0, 0, 0, 0])

    def test_wind_is_relative(self, params):
        q = normalize(np.array([1.0, 0.2, -0.4, 0.1]))
        u = np.array([2.0, 2.1, 0.1, -0.1])
        x1 = pack_state(np.zeros(3), [3.0, 1.0, 0.0], q, np.zeros(3))
        x2 = pack_state(np.zeros(3), [5.0, 1.0, 0.0], q, np.zeros(3))
        a1 = state_deriv(x1, u, params)
        a2 = state_deriv(x2, u, params, wind=np.array([2.0, 0.0, 0.0]))
        np.testing.assert_allclose(a1[3:], a2[3:], atol=1e-12)


class TestParams:
    def test_bundled_values(self, params):
        assert params.m == 0.492
        assert params.S_p == 0.3989
        assert params.damping["C_mq"] == 1.2715

    def test_overrides_and_alias(self, tmp_path):
        f = tmp_path / "p.yaml"
        f.write_text("m: 1.0\nS_f: 0.5\n")
        p = load_params(f, rho=1.0)
        assert (p.m, p.S_p, p.rho) == (1.0, 0.5, 1.0)

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "p.yaml"
        f.write_text("mass: 1.0\n")
        with pytest.raises(KeyError):
            load_params(f)

    def test_invalid_values(self, params):
        with pytest.raises(ValueError):
            params.replace(m=-1.0)
        with pytest.raises(ValueError):
            params.replace(frame="ned")
