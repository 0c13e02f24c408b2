"""Zero-moment hierarchical hover controller.

The outer loop builds a reference force ``f_r`` from position and velocity
errors. A desired attitude ``q_d`` and thrust magnitude ``f`` are carried as
controller states and steered so that ``R(q_d) d_* f`` tracks ``f_r``. An
inner attitude loop makes the vehicle follow ``q_d``, and the distribution
step maps torque plus thrust onto the four effective commands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tailsitter.mathkin import (
    quat_conj,
    quat_error,
    quat_from_axis_angle,
    quat_mul,
    rot_from_quat,
    sign_pos,
    skew,
)
from tailsitter.vehicle import VehicleParams, input_matrices, unpack_state

F_MIN = 0.1
D_STAR = np.array([1.0, 0.0, 0.0])
GOMPERTZ_B = np.log(np.log(2.0))
GOMPERTZ_B_PRINTED = -np.log(0.5)


class ThrustTooLow(RuntimeError):
    """The thrust state fell to the division guard."""


@dataclass(frozen=True)
class HoverGains:
    """Gains of the hover controller.

    ``mode`` selects the reference-force law: ``"linear"``, ``"governor"``
    (component-wise error clamps), ``"gompertz_sat"`` or ``"qto"``.
    ``nu_form`` is ``"prime"`` (first-order force error) or ``"original"``.
    """

    k_pp: float = 1.0
    k_pd: float = 1.0
    k_delta: float = 8.0
    k_q: float = 0.5
    # per-axis, scaled by inertia for a 10 rad/s, 0.8-damped attitude loop
    k_R: tuple[float, float, float] | float = (1.4, 0.56, 1.22)
    k_omega: tuple[float, float, float] | float = (0.112, 0.0448, 0.0976)
    M_i: float = 2.0
    e_p_max: float = 1.0
    e_v_max: float = 1.0
    mode: str = "governor"
    nu_form: str = "prime"
    gompertz_b: float = GOMPERTZ_B
    gompertz_c: float = 1.0

    def __post_init__(self) -> None:
        for name in ("k_pp", "k_pd", "k_delta", "M_i", "e_p_max", "e_v_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.k_q < 0:
            raise ValueError("k_q must be non-negative")
        if self.mode not in ("linear", "governor", "gompertz_sat", "qto"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.nu_form not in ("prime", "original"):
            raise ValueError(f"unknown nu form {self.nu_form!r}")


@dataclass(frozen=True)
class HoverCtlState:
    q_d: np.ndarray
    f: float


def init_state(x: np.ndarray, params: VehicleParams) -> HoverCtlState:
    """Start with ``q_d`` at the current attitude and ``f = m g``."""
    return HoverCtlState(np.array(x[6:10], dtype=float), params.m * params.g)


# ---------------------------------------------------------------------------
# Saturations


def _exponent(x, b, c):
    # exp(700) is finite, and exp(-exp(700)) already underflows to zero
    return np.minimum(b - c * np.asarray(x, dtype=float), 700.0)


def gompertz(x, M: float, b: float = GOMPERTZ_B, c: float = 1.0):
    """Gompertz sigmoid ``2 M exp(-exp(b - c x)) - M``."""
    return 2.0 * M * np.exp(-np.exp(_exponent(x, b, c))) - M


def gompertz_slope(x, M: float, b: float = GOMPERTZ_B, c: float = 1.0):
    e = np.exp(_exponent(x, b, c))
    return 2.0 * M * c * e * np.exp(-e)


def smooth_max(a, b, eps: float = 1e-3):
    """Smooth upper bound of ``max(a, b)``."""
    return 0.5 * (a + b + np.sqrt((a - b) ** 2 + eps**2))


def _gamma(e_p: np.ndarray, e_v: np.ndarray, gains: HoverGains) -> np.ndarray:
    kp, kd = gains.k_pp, gains.k_pd
    if gains.mode == "linear":
        return -kp * e_p - kd * e_v
    if gains.mode == "governor":
        return (-kp * np.clip(e_p, -gains.e_p_max, gains.e_p_max)
                - kd * np.clip(e_v, -gains.e_v_max, gains.e_v_max))
    if gains.mode == "gompertz_sat":
        return gompertz(-kp * e_p - kd * e_v, gains.M_i, gains.gompertz_b, gains.gompertz_c)
    mu = smooth_max(np.linalg.norm(e_v) / (2.0 * gains.M_i), kd / kp)
    return -gompertz(kp * (e_p + e_v * mu), gains.M_i, gains.gompertz_b, gains.gompertz_c)


def reference_force(
    e_p: np.ndarray, e_v: np.ndarray, params: VehicleParams, gains: HoverGains
) -> np.ndarray:
    """``f_r = m g_up + gamma(e_p, e_v)`` for the configured law."""
    return params.m * params.g * params.up + _gamma(e_p, e_v, gains)


def reference_force_jacobians(
    e_p: np.ndarray, e_v: np.ndarray, gains: HoverGains
) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of ``f_r`` with respect to ``e_p`` and ``e_v``."""
    kp, kd = gains.k_pp, gains.k_pd
    if gains.mode == "linear":
        return -kp * np.eye(3), -kd * np.eye(3)
    if gains.mode == "governor":
        gp = (np.abs(e_p) < gains.e_p_max).astype(float)
        gv = (np.abs(e_v) < gains.e_v_max).astype(float)
        return -kp * np.diag(gp), -kd * np.diag(gv)
    if gains.mode == "gompertz_sat":
        s = gompertz_slope(-kp * e_p - kd * e_v, gains.M_i, gains.gompertz_b, gains.gompertz_c)
        return -kp * np.diag(s), -kd * np.diag(s)
    h = 1e-6
    Gp, Gv = np.empty((3, 3)), np.empty((3, 3))
    for j in range(3):
        d = np.zeros(3)
        d[j] = h
        Gp[:, j] = (_gamma(e_p + d, e_v, gains) - _gamma(e_p - d, e_v, gains)) / (2 * h)
        Gv[:, j] = (_gamma(e_p, e_v + d, gains) - _gamma(e_p, e_v - d, gains)) / (2 * h)
    return Gp, Gv


# ---------------------------------------------------------------------------
# Distribution


def kernel_command(params: VehicleParams) -> np.ndarray:
    """Unit-force kernel command: ``[1,1,0,0]`` scaled so ``|F_b u| = 1``."""
    F_b, _ = input_matrices(params)
    base = np.array([1.0, 1.0, 0.0, 0.0])
    return base / np.linalg.norm(F_b @ base)


def allocation(params: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """``(pinv(M_b), u_bar)`` used by :func:`distribute`."""
    _, M_b = input_matrices(params)
    return np.linalg.pinv(M_b), kernel_command(params)


def distribute(
    tau_r: np.ndarray,
    f: float,
    params: VehicleParams,
    alloc: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """``u = pinv(M_b) tau_r + u_bar f``."""
    M_pinv, u_bar = allocation(params) if alloc is None else alloc
    return M_pinv @ tau_r + u_bar * f


# ---------------------------------------------------------------------------
# Outer loop


def nu_prime(e_p, e_v, f_delta, R_q, R_qd, d_star, f, m: float, gains: HoverGains):
    """Corrected virtual input giving first-order force-error dynamics."""
    kp, kd, kD = gains.k_pp, gains.k_pd, gains.k_delta
    return (
        kp * kd / m * e_p
        + (kd**2 / m - kp) * e_v
        - (kd / m + kD) * f_delta
        - kd / m * (R_q - R_qd) @ d_star * f
    )


def nu_original(e_p, e_v, f_delta, m: float, gains: HoverGains):
    """Virtual input without the attitude-mismatch correction."""
    kp, kd, kD = gains.k_pp, gains.k_pd, gains.k_delta
    return kp * kd / m * e_p + (kd**2 / m - kp) * e_v - (kd / m + kD) * f_delta


def orientation_error(q_ref: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, float]:
    """Vector part of ``q_ref^-1 (x) q`` on the short-way branch, and its sign."""
    qe = quat_error(q_ref, q)
    s = sign_pos(qe[0])
    return s * qe[1:], s


def desired_rate(
    x: np.ndarray,
    ctl: HoverCtlState,
    nu: np.ndarray,
    q_ref: np.ndarray,
    gains: HoverGains,
    d_star: np.ndarray = D_STAR,
) -> np.ndarray:
    """``omega_d = (1/f) [d_*]x R(q_d)^T nu - k_q d_* d_*^T eps'``.

    Raises
    ------
    ThrustTooLow
        If ``f <= F_MIN``.
    """
    if ctl.f <= F_MIN:
        raise ThrustTooLow(f"thrust state {ctl.f:.3g} N at or below {F_MIN} N")
    R_d = rot_from_quat(ctl.q_d)
    eps, _ = orientation_error(q_ref, x[6:10])
    return skew(d_star) @ R_d.T @ nu / ctl.f - gains.k_q * d_star * (d_star @ eps)


@dataclass(frozen=True)
class OuterTerms:
    e_p: np.ndarray
    e_v: np.ndarray
    f_r: np.ndarray
    f_delta: np.ndarray
    nu: np.ndarray
    f_dot: float
    omega_d: np.ndarray
    R: np.ndarray
    R_d: np.ndarray
    G_p: np.ndarray
    G_v: np.ndarray


def outer_terms(
    x: np.ndarray,
    ctl: HoverCtlState,
    target_p: np.ndarray,
    q_ref: np.ndarray,
    params: VehicleParams,
    gains: HoverGains,
    d_star: np.ndarray = D_STAR,
) -> OuterTerms:
    """Evaluate the outer-loop signals at the current state.

    ``nu`` is the predicted reference-force rate minus ``k_delta f_delta``.
    The prediction uses the vehicle attitude (``"prime"``) or the desired
    attitude (``"original"``) for the thrust direction. In linear mode
    these reduce to :func:`nu_prime` and :func:`nu_original`.
    """
    p, v, q, _ = unpack_state(x)
    e_p = p - target_p
    e_v = np.array(v, dtype=float)
    R = rot_from_quat(q)
    R_d = rot_from_quat(ctl.q_d)
    f_r = reference_force(e_p, e_v, params, gains)
    f_delta = R_d @ d_star * ctl.f - f_r
    G_p, G_v = reference_force_jacobians(e_p, e_v, gains)
    R_thrust = R if gains.nu_form == "prime" else R_d
    a_est = R_thrust @ d_star * ctl.f / params.m + params.gravity
    nu = G_p @ e_v + G_v @ a_est - gains.k_delta * f_delta
    f_dot = float((R_d @ d_star) @ nu)
    omega_d = desired_rate(x, ctl, nu, q_ref, gains, d_star)
    return OuterTerms(e_p, e_v, f_r, f_delta, nu, f_dot, omega_d, R, R_d, G_p, G_v)


def feedforward_alpha(
    x: np.ndarray,
    ctl: HoverCtlState,
    target_p: np.ndarray,
    q_ref: np.ndarray,
    params: VehicleParams,
    gains: HoverGains,
    accel: np.ndarray | None = None,
    d_star: np.ndarray = D_STAR,
) -> np.ndarray:
    """Analytic time derivative of the desired body rate.

    Parameters
    ----------
    accel : ndarray, optional
        Inertial acceleration of the vehicle. Defaults to the thrust-only
        prediction ``R(q) d_* f / m + g``.

    Notes
    -----
    Exact for the linear and governor laws (the latter almost everywhere);
    for the smooth saturations the rate of change of their slopes is
    neglected.
    """
    t = outer_terms(x, ctl, target_p, q_ref, params, gains, d_star)
    q, w = x[6:10], x[10:13]
    f = ctl.f
    m = params.m
    if accel is None:
        accel = t.R @ d_star * f / m + params.gravity
    Wd = skew(t.omega_d)
    Rd_dot = t.R_d @ Wd
    if gains.nu_form == "prime":
        R_thrust, R_thrust_dot = t.R, t.R @ skew(w)
    else:
        R_thrust, R_thrust_dot = t.R_d, Rd_dot
    a_est_dot = (R_thrust_dot @ d_star * f + R_thrust @ d_star * t.f_dot) / m
    f_r_dot = t.G_p @ t.e_v + t.G_v @ accel
    f_delta_dot = t.R_d @ d_star * t.f_dot + Rd_dot @ d_star * f - f_r_dot
    nu_dot = t.G_p @ accel + t.G_v @ a_est_dot - gains.k_delta * f_delta_dot

    D = skew(d_star)
    term1 = -t.f_dot / f**2 * D @ t.R_d.T @ t.nu
    term2 = -D @ Wd @ t.R_d.T @ t.nu / f
    term3 = D @ t.R_d.T @ nu_dot / f
    qe = quat_error(q_ref, q)
    s = sign_pos(qe[0])
    eps_dot = 0.5 * s * (qe[0] * w + np.cross(qe[1:], w))
    term4 = -gains.k_q * d_star * (d_star @ eps_dot)
    return term1 + term2 + term3 + term4


def force_error_rate(
    x: np.ndarray,
    ctl: HoverCtlState,
    target_p: np.ndarray,
    q_ref: np.ndarray,
    params: VehicleParams,
    gains: HoverGains,
    d_star: np.ndarray = D_STAR,
) -> tuple[np.ndarray, np.ndarray]:
    """``(f_delta, f_delta_dot)`` along the thrust-only translational dynamics."""
    t = outer_terms(x, ctl, target_p, q_ref, params, gains, d_star)
    accel = t.R @ d_star * ctl.f / params.m + params.gravity
    f_r_dot = t.G_p @ t.e_v + t.G_v @ accel
    Rd_dot = t.R_d @ skew(t.omega_d)
    f_delta_dot = t.R_d @ d_star * t.f_dot + Rd_dot @ d_star * ctl.f - f_r_dot
    return t.f_delta, f_delta_dot


# ---------------------------------------------------------------------------
# Inner loop and composition


def attitude_torque(
    x: np.ndarray,
    ctl: HoverCtlState,
    omega_d: np.ndarray,
    omega_d_dot: np.ndarray,
    params: VehicleParams,
    gains: HoverGains,
) -> np.ndarray:
    """Quaternion PD with gyroscopic and feedforward compensation."""
    q, w = x[6:10], x[10:13]
    qe = quat_mul(quat_conj(ctl.q_d), q)
    J = params.J
    return (
        -np.asarray(gains.k_R) * sign_pos(qe[0]) * qe[1:]
        - np.asarray(gains.k_omega) * (w - omega_d)
        + np.cross(w, J @ w)
        + J @ omega_d_dot
    )


def advance_state(ctl: HoverCtlState, omega_d: np.ndarray, f_dot: float, dt: float) -> HoverCtlState:
    """Integrate ``q_d' = q_d (x) omega_d / 2`` exactly and ``f`` by Euler."""
    n = np.linalg.norm(omega_d)
    if n > 0:
        q_d = quat_mul(ctl.q_d, quat_from_axis_angle(omega_d, n * dt))
    else:
        q_d = ctl.q_d
    return HoverCtlState(q_d, max(ctl.f + f_dot * dt, 2.0 * F_MIN))


def hover_step(
    x: np.ndarray,
    ctl: HoverCtlState,
    target_p: np.ndarray,
    q_ref: np.ndarray,
    dt: float,
    gains: HoverGains,
    params: VehicleParams,
    alloc: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, HoverCtlState]:
    """One control update.

    Returns the effective command (before actuator saturation, which the
    simulator applies) and the advanced controller state. ``alloc`` may
    carry a precomputed :func:`allocation`.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    target_p = np.asarray(target_p, dtype=float)
    t = outer_terms(x, ctl, target_p, q_ref, params, gains)
    w_dot = feedforward_alpha(x, ctl, target_p, q_ref, params, gains)
    tau = attitude_torque(x, ctl, t.omega_d, w_dot, params, gains)
    u = distribute(tau, ctl.f, params, alloc)
    return u, advance_state(ctl, t.omega_d, t.f_dot, dt)
