"""Line-of-sight controller for wing-borne flight.

The attitude loop turns the velocity vector toward the target point, a PID
loop on the body-axis airspeed sets the total thrust, and an internal
allocation dynamics solves for the thrust split and elevon deflections that
produce the demanded torque under the augmented aerodynamic model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tailsitter.mathkin import rot_from_quat, sign_pos
from tailsitter.vehicle import (
    ActuatorLimits,
    VehicleParams,
    airspeed_norm,
    augmented_wrench,
    effective_from_virtual,
    unpack_state,
)

V_MIN = 0.5
ILL_CONDITIONED = 1e14
DERIVATIVE_TAU = 0.05


class DegenerateGeometry(ValueError):
    """Line-of-sight direction undefined (speed or range too small)."""


class ZeroMatrix(ValueError):
    """Matrix with no non-zero singular value."""


@dataclass(frozen=True)
class FlightGains:
    """Gains of the flight controller.

    ``k_c`` and ``k_d`` may be scalars or per-axis triples.
    """

    k_c: tuple[float, float, float] | float = (0.14, 0.056, 0.122)
    k_d: tuple[float, float, float] | float = (0.028, 0.0112, 0.0244)
    k_p: float = 1.0
    k_i: float = 0.5
    k_dv: float = 0.05
    k_u: float = 100.0
    sigma_floor: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("k_c", "k_d", "k_p", "k_i", "k_dv", "k_u"):
            if np.any(np.asarray(getattr(self, name)) <= 0):
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.sigma_floor < 1.0:
            raise ValueError("sigma_floor must lie in (0, 1)")


@dataclass(frozen=True)
class FlightCtlState:
    """Internal allocation state ``[t_diff, d_sum, d_diff]`` and PID memory."""

    u_bar: np.ndarray = field(default_factory=lambda: np.zeros(3))
    pid_integral: float = 0.0
    prev_vbx: float | None = None
    vbx_rate: float = 0.0
    kappa: float = 1.0


def los_error_quat(p: np.ndarray, p_c: np.ndarray, v: np.ndarray, v_min: float = V_MIN) -> np.ndarray:
    """Rotation taking the target direction onto the velocity direction.

    With ``c = <u_c, u_v>`` the result is
    ``[sqrt((1+c)/2), unit(u_c x u_v) sqrt((1-c)/2)]``. In the
    anti-aligned case the axis is ``e3`` projected orthogonally to
    ``u_v`` (``e2`` if that projection vanishes).

    Raises
    ------
    DegenerateGeometry
        If ``|v| <= v_min`` or the target coincides with ``p``.
    """
    los = np.asarray(p_c, dtype=float) - np.asarray(p, dtype=float)
    speed = np.linalg.norm(v)
    rng = np.linalg.norm(los)
    if speed <= v_min:
        raise DegenerateGeometry(f"speed {speed:.3g} m/s at or below {v_min} m/s")
    if rng == 0.0:
        raise DegenerateGeometry("target coincides with the vehicle position")
    u_c = los / rng
    u_v = np.asarray(v, dtype=float) / speed
    c = float(np.clip(u_c @ u_v, -1.0, 1.0))
    axis = np.cross(u_c, u_v)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        if c > 0:
            return np.array([1.0, 0.0, 0.0, 0.0])
        axis = np.array([0.0, 0.0, 1.0]) - u_v[2] * u_v
        if np.linalg.norm(axis) < 1e-6:
            axis = np.array([0.0, 1.0, 0.0]) - u_v[1] * u_v
        axis = axis / np.linalg.norm(axis)
        return np.concatenate(([0.0], axis))
    return np.concatenate(([np.sqrt(0.5 * (1.0 + c))], axis / n * np.sqrt(0.5 * (1.0 - c))))


def los_torque(q_e: np.ndarray, omega_b: np.ndarray, J: np.ndarray, gains: FlightGains) -> np.ndarray:
    """``-k_c sign(eta) eps + omega x J omega - k_d omega`` with ``sign(0) = +1``."""
    return (
        -np.asarray(gains.k_c) * sign_pos(q_e[0]) * np.asarray(q_e[1:])
        + np.cross(omega_b, J @ omega_b)
        - np.asarray(gains.k_d) * omega_b
    )


def airspeed_pid(
    v_bx: float,
    v_c: float,
    state: FlightCtlState,
    dt: float,
    gains: FlightGains,
    t_max: float,
) -> tuple[float, FlightCtlState]:
    """PID on the body-axis airspeed error with anti-windup.

    The integrator accumulates ``v_c - v_bx`` and is clamped so the output
    stays within ``[0, t_max]``. The derivative acts on a low-passed
    first difference of ``v_bx``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    err = v_c - v_bx
    if state.prev_vbx is None:
        rate = 0.0
    else:
        a = dt / (DERIVATIVE_TAU + dt)
        rate = (1.0 - a) * state.vbx_rate + a * (v_bx - state.prev_vbx) / dt
    base = gains.k_p * err - gains.k_dv * rate
    integral = state.pid_integral + err * dt
    lo, hi = (0.0 - base) / gains.k_i, (t_max - base) / gains.k_i
    integral = float(np.clip(integral, min(lo, hi), max(lo, hi)))
    t_sum = float(np.clip(base + gains.k_i * integral, 0.0, t_max))
    new = FlightCtlState(state.u_bar, integral, float(v_bx), float(rate), state.kappa)
    return t_sum, new


def allocation_moment(
    u_bar: np.ndarray, t_sum: float, v_b: np.ndarray, omega_b: np.ndarray, params: VehicleParams
) -> np.ndarray:
    """Body moment produced by ``[t_sum, *u_bar]`` under the augmented model."""
    return augmented_wrench(np.concatenate(([t_sum], u_bar)), v_b, omega_b, params)[1]


def allocation_jacobian(
    u_bar: np.ndarray, t_sum: float, v_b: np.ndarray, eta_air: float, params: VehicleParams
) -> np.ndarray:
    """Jacobian of the augmented moment with respect to ``[t_diff, d_sum, d_diff]``."""
    t_diff, d_sum, d_diff = u_bar
    k = params.k_wet
    Cl, Cd0 = params.C_l, params.C_d0
    xf, xm, ay, dr = params.xi_f, params.xi_m, params.a_y, params.delta_r
    qa = 0.25 * params.rho * params.S * eta_air
    vx, vz = v_b[0], v_b[2]
    roll = k * ay * Cl * xf
    pitch = dr * Cl * k * xm
    return np.array(
        [
            [params.k_m / params.k_f - 0.5 * roll * d_sum, -0.5 * roll * t_diff,
             -0.5 * roll * t_sum - qa * ay * Cl * xf * vx],
            [0.5 * pitch * d_diff, 0.5 * pitch * t_sum + dr * Cl * qa * xm * vx,
             0.5 * pitch * t_diff],
            [-(params.p_y - k * ay * Cd0), 0.0, -qa * ay * Cd0 * xf * vz],
        ]
    )


def regularized_inverse(Jm: np.ndarray, sigma_floor: float = 1e-6) -> tuple[np.ndarray, float]:
    """SVD inverse with singular values floored at ``sigma_floor * sigma_max``.

    Returns the inverse and the unclamped condition number
    ``sigma_max / sigma_min`` (``inf`` for a singular matrix).

    Raises
    ------
    ZeroMatrix
        If every singular value is zero.
    """
    U, s, Vt = np.linalg.svd(np.asarray(Jm, dtype=float))
    if s[0] == 0.0:
        raise ZeroMatrix("matrix has no non-zero singular value")
    kappa = s[0] / s[-1] if s[-1] > 0 else np.inf
    s_reg = np.maximum(s, sigma_floor * s[0])
    return (Vt.T / s_reg) @ U.T, float(kappa)


def _project(u_bar: np.ndarray, t_sum: float, params: VehicleParams, limits: ActuatorLimits) -> np.ndarray:
    t_min, t_max = limits.thrust_bounds(params)
    d1 = np.clip(0.5 * (u_bar[1] + u_bar[2]), -limits.delta_max, limits.delta_max)
    d2 = np.clip(0.5 * (u_bar[1] - u_bar[2]), -limits.delta_max, limits.delta_max)
    # keep each motor's thrust inside its bounds for the current total
    span = min(t_sum - 2 * t_min, 2 * t_max - t_sum)
    t_diff = np.clip(u_bar[0], -max(span, 0.0), max(span, 0.0))
    return np.array([t_diff, d1 + d2, d1 - d2])


def allocation_step(
    ctl: FlightCtlState,
    gamma_c: np.ndarray,
    t_sum: float,
    v_b: np.ndarray,
    omega_b: np.ndarray,
    dt: float,
    params: VehicleParams,
    gains: FlightGains,
    limits: ActuatorLimits | None = None,
) -> FlightCtlState:
    """Euler step of ``u_bar' = -k_u J^-1 (M(u_bar) - gamma_c)``.

    The Jacobian is inverted by :func:`regularized_inverse`; deflections and
    motor thrusts are projected into their limits afterwards.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    limits = ActuatorLimits() if limits is None else limits
    eta = airspeed_norm(v_b, omega_b, params)
    Jm = allocation_jacobian(ctl.u_bar, t_sum, v_b, eta, params)
    J_inv, kappa = regularized_inverse(Jm, gains.sigma_floor)
    resid = allocation_moment(ctl.u_bar, t_sum, v_b, omega_b, params) - gamma_c
    u_bar = _project(ctl.u_bar - dt * gains.k_u * J_inv @ resid, t_sum, params, limits)
    return FlightCtlState(u_bar, ctl.pid_integral, ctl.prev_vbx, ctl.vbx_rate, kappa)


def flight_step(
    x: np.ndarray,
    ctl: FlightCtlState,
    p_c: np.ndarray,
    v_c: float,
    dt: float,
    gains: FlightGains,
    params: VehicleParams,
    limits: ActuatorLimits | None = None,
    wind: np.ndarray | None = None,
) -> tuple[np.ndarray, FlightCtlState]:
    """One flight-control update returning the effective command.

    The line-of-sight error is formed from body-frame vectors so that its
    vector part is directly a body torque axis.
    """
    limits = ActuatorLimits() if limits is None else limits
    p, v, q, w = unpack_state(x)
    R = rot_from_quat(q)
    air = v if wind is None else v - wind
    v_b = R.T @ air
    q_e = los_error_quat(np.zeros(3), R.T @ (np.asarray(p_c, dtype=float) - p), v_b)
    gamma = los_torque(q_e, w, params.J, gains)
    _, t_max = limits.thrust_bounds(params)
    t_sum, ctl = airspeed_pid(float(v_b[0]), v_c, ctl, dt, gains, 2.0 * t_max)
    ctl = allocation_step(ctl, gamma, t_sum, v_b, w, dt, params, gains, limits)
    u = effective_from_virtual(np.concatenate(([t_sum], ctl.u_bar)))
    return u, ctl


def state_from_command(u_prime: np.ndarray) -> FlightCtlState:
    """Controller state reproducing a given virtual command (mode hand-off)."""
    return FlightCtlState(np.asarray(u_prime[1:], dtype=float), 0.0, None, 0.0, 1.0)
