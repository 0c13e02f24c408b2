"""DarkO vehicle model.

Parameters, actuator limits, the factored input matrices, the
airspeed-augmented wrench and the 6-DOF state derivative.

Commands come in two parameterizations:

* effective ``u = [T1, T2, delta1*T1, delta2*T2]``
* virtual ``u' = [T1+T2, T1-T2, delta1+delta2, delta1-delta2]``

Motor 1 sits on the +y wing. The state vector is
``x = [p(3), v(3), q(4), omega_b(3)]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from tailsitter.mathkin import normalize, quat_deriv, rot_from_quat, skew

# Threshold below which an elevon angle cannot be recovered from delta*T.
THRUST_GUARD = 0.05

# Appendix-table keys mapped to attribute names.
_KEY_ALIASES = {"S_f": "S_p"}
_DAMPING_KEYS = ("C_lp", "C_lq", "C_lr", "C_mp", "C_mq", "C_mr", "C_np", "C_nq", "C_nr")


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the vehicle.

    Attributes mirror the published parameter table, plus the loose model
    constants ``rho``, ``mu``, ``delta_r`` and ``S_wet`` and the inertial
    frame convention (``"z_up"`` or ``"z_down"``).
    """

    m: float = 0.492
    c: float = 0.13
    b: float = 0.55
    S: float = 0.0743
    S_p: float = 0.3989
    Jxx: float = 0.0070
    Jyy: float = 0.0028
    Jzz: float = 0.0061
    J_p: float = 5.1116e-6
    k_f: float = 5.13e-6
    k_m: float = 2.64e-7
    C_d0: float = 0.025
    C_y0: float = 0.0
    p_x: float = 0.065
    p_y: float = 0.155
    p_z: float = 0.0
    a_x: float = 0.0
    a_y: float = 0.155
    a_z: float = 0.0
    xi_f: float = 0.55
    xi_m: float = 0.85
    rho: float = 1.225
    mu: float = 0.0
    delta_r: float = -0.00643
    S_wet: float = 0.834
    g: float = 9.81
    frame: str = "z_up"
    damping: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.m <= 0 or self.S <= 0 or self.S_p <= 0:
            raise ValueError("m, S and S_p must be positive")
        if min(self.Jxx, self.Jyy, self.Jzz) <= 0:
            raise ValueError("inertia must be positive")
        if self.k_f <= 0 or self.k_m <= 0:
            raise ValueError("k_f and k_m must be positive")
        if self.frame not in ("z_up", "z_down"):
            raise ValueError(f"unknown frame {self.frame!r}")

    @property
    def J(self) -> np.ndarray:
        return np.diag([self.Jxx, self.Jyy, self.Jzz])

    @property
    def k_wet(self) -> float:
        """Blown-area ratio ``S_wet / (4 S_p)``."""
        return self.S_wet / (4.0 * self.S_p)

    @property
    def C_l(self) -> float:
        """Lift slope ``2 pi + C_d0``."""
        return 2.0 * np.pi + self.C_d0

    @property
    def gravity(self) -> np.ndarray:
        """Gravitational acceleration in the inertial frame."""
        sign = -1.0 if self.frame == "z_up" else 1.0
        return np.array([0.0, 0.0, sign * self.g])

    @property
    def up(self) -> np.ndarray:
        """Unit vector opposing gravity."""
        return -self.gravity / self.g

    def motor_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([self.p_x, self.p_y, self.p_z]),
            np.array([self.p_x, -self.p_y, self.p_z]),
        )

    def aero_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([self.a_x, self.a_y, self.a_z]),
            np.array([self.a_x, -self.a_y, self.a_z]),
        )

    def replace(self, **changes) -> "VehicleParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ActuatorLimits:
    """Motor speed and elevon position/rate bounds."""

    omega_min: float = 200.0
    omega_max: float = 1000.0
    omega_dot_max: float = 3000.0
    delta_max: float = np.radians(30.0)
    delta_rate_max: float = 5.24

    def __post_init__(self) -> None:
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be below omega_max")
        if min(self.omega_max, self.omega_dot_max, self.delta_max, self.delta_rate_max) <= 0:
            raise ValueError("limits must be positive")

    def thrust_bounds(self, params: VehicleParams) -> tuple[float, float]:
        return params.k_f * self.omega_min**2, params.k_f * self.omega_max**2


def load_params(path: str | Path | None = None, **overrides) -> VehicleParams:
    """Load parameters from a YAML file keyed by the table symbols.

    With no path the bundled ``darko.yaml`` is used. Keyword overrides
    are applied last.
    """
    if path is None:
        text = resources.files("tailsitter.data").joinpath("darko.yaml").read_text()
    else:
        text = Path(path).read_text()
    raw = yaml.safe_load(text) or {}
    raw.update(overrides)
    kwargs: dict = {}
    damping = {}
    names = {f.name for f in dataclasses.fields(VehicleParams)}
    for key, value in raw.items():
        key = _KEY_ALIASES.get(key, key)
        if key in _DAMPING_KEYS:
            damping[key] = float(value)
        elif key in names:
            kwargs[key] = value if key == "frame" else float(value)
        else:
            raise KeyError(f"unknown parameter {key!r}")
    kwargs["damping"] = damping
    return VehicleParams(**kwargs)


# ---------------------------------------------------------------------------
# Command conversions


def thrust_from_motor_speed(omega: np.ndarray | float, params: VehicleParams):
    """Propeller thrust ``k_f * omega**2``."""
    return params.k_f * np.asarray(omega, dtype=float) ** 2


def motor_speed_from_thrust(
    thrust: np.ndarray | float, params: VehicleParams, limits: ActuatorLimits | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`thrust_from_motor_speed`.

    Returns
    -------
    omega : ndarray
        Motor speed, clamped to the limits when given.
    clamped : ndarray of bool
        True where the demanded thrust was unreachable.
    """
    thrust = np.atleast_1d(np.asarray(thrust, dtype=float))
    omega = np.sqrt(np.maximum(thrust, 0.0) / params.k_f)
    if limits is None:
        return omega, thrust < 0
    clipped = np.clip(omega, limits.omega_min, limits.omega_max)
    return clipped, (clipped != omega) | (thrust < 0)


def virtual_from_effective(u: np.ndarray, delta_prev: np.ndarray | None = None) -> np.ndarray:
    """Map ``[T1, T2, d1*T1, d2*T2]`` to ``[T1+T2, T1-T2, d1+d2, d1-d2]``."""
    T = u[:2]
    delta = elevon_angles(u, delta_prev)
    return np.array([T[0] + T[1], T[0] - T[1], delta[0] + delta[1], delta[0] - delta[1]])


def effective_from_virtual(u_prime: np.ndarray) -> np.ndarray:
    """Inverse of :func:`virtual_from_effective`."""
    t_sum, t_diff, d_sum, d_diff = u_prime
    T1, T2 = 0.5 * (t_sum + t_diff), 0.5 * (t_sum - t_diff)
    d1, d2 = 0.5 * (d_sum + d_diff), 0.5 * (d_sum - d_diff)
    return np.array([T1, T2, d1 * T1, d2 * T2])


def elevon_angles(u: np.ndarray, delta_prev: np.ndarray | None = None) -> np.ndarray:
    """Recover elevon deflections from an effective command.

    Below ``THRUST_GUARD`` newtons the previous deflection is held
    (zero if none is given).
    """
    prev = np.zeros(2) if delta_prev is None else np.asarray(delta_prev, dtype=float)
    out = prev.copy()
    for i in range(2):
        if abs(u[i]) >= THRUST_GUARD:
            out[i] = u[2 + i] / u[i]
    return out


def physical_from_effective(
    u: np.ndarray, params: VehicleParams, delta_prev: np.ndarray | None = None
) -> np.ndarray:
    """Effective command to ``[omega1, omega2, delta1, delta2]`` (unclamped)."""
    omega = np.sqrt(np.maximum(u[:2], 0.0) / params.k_f)
    return np.concatenate((omega, elevon_angles(u, delta_prev)))


def effective_from_physical(phys: np.ndarray, params: VehicleParams) -> np.ndarray:
    """``[omega1, omega2, delta1, delta2]`` to the effective command."""
    T = params.k_f * phys[:2] ** 2
    return np.array([T[0], T[1], phys[2] * T[0], phys[3] * T[1]])


def saturate_command(
    raw: np.ndarray, prev: np.ndarray, dt: float, limits: ActuatorLimits
) -> np.ndarray:
    """Apply position then rate limits to a physical command.

    Parameters
    ----------
    raw, prev : ndarray
        ``[omega1, omega2, delta1, delta2]`` requested now and applied at
        the previous step.
    dt : float
        Time since ``prev`` was applied.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = np.empty(4)
    out[:2] = np.clip(raw[:2], limits.omega_min, limits.omega_max)
    out[2:] = np.clip(raw[2:], -limits.delta_max, limits.delta_max)
    dw = limits.omega_dot_max * dt
    dd = limits.delta_rate_max * dt
    out[:2] = np.clip(out[:2], prev[:2] - dw, prev[:2] + dw)
    out[2:] = np.clip(out[2:], prev[2:] - dd, prev[2:] + dd)
    return out


# ---------------------------------------------------------------------------
# Wrench models


def input_matrices(params: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """Force and moment input matrices ``F_b``, ``M_b`` (3x4 each)."""
    k = params.k_wet
    Cl = params.C_l
    lift = k * Cl * params.xi_f
    roll = k * params.a_y * Cl * params.xi_f
    pitch = k * params.delta_r * Cl * params.xi_m
    yaw = params.p_y - k * params.a_y * params.C_d0
    react = params.k_m / params.k_f
    axial = 1.0 - k * params.C_d0
    F_b = np.array(
        [
            [axial, axial, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -lift, -lift],
        ]
    )
    M_b = np.array(
        [
            [react, -react, -roll, roll],
            [0.0, 0.0, pitch, pitch],
            [-yaw, yaw, 0.0, 0.0],
        ]
    )
    return F_b, M_b


def primitive_wrench(
    T: np.ndarray, delta: np.ndarray, params: VehicleParams, wing: str = "straight"
) -> tuple[np.ndarray, np.ndarray]:
    """Per-motor force and moment sums built from the elementary matrices.

    Parameters
    ----------
    T : ndarray
        Axial thrust of each motor.
    delta : ndarray
        Elevon deflections.
    wing : {"straight", "arc"}
        Shape of the deflection projection. The arc form also projects
        thrust onto the body y axis, which only matters when ``C_y0 != 0``.
    """
    k = params.k_wet
    Cl = params.C_l
    phi_fv = np.diag([params.C_d0, params.C_y0, Cl])
    phi_mv = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, -params.delta_r * Cl / params.c],
            [0.0, params.delta_r * params.C_y0 / params.c, 0.0],
        ]
    )
    B = np.diag([params.b, params.c, params.b])
    react = params.k_m / params.k_f
    p = params.motor_offsets()
    a = params.aero_offsets()
    force = np.zeros(3)
    moment = np.zeros(3)
    for i in range(2):
        Ti = np.array([T[i], 0.0, 0.0])
        d_f = _deflection(params.xi_f * delta[i], wing)
        d_m = _deflection(params.xi_m * delta[i], wing)
        force += (np.eye(3) - k * phi_fv) @ Ti + k * phi_fv @ d_f @ Ti
        moment += (
            -k * B @ phi_mv @ Ti
            + k * B @ phi_mv @ d_m @ Ti
            - k * skew(a[i]) @ phi_fv @ Ti
            + k * skew(a[i]) @ phi_fv @ d_f @ Ti
            + (1.0 if i == 0 else -1.0) * react * Ti
            + skew(p[i]) @ Ti
        )
    return force, moment


def _deflection(x: float, wing: str) -> np.ndarray:
    if wing == "straight":
        return np.array([[0.0, 0.0, x], [0.0, 0.0, 0.0], [-x, 0.0, 0.0]])
    if wing == "arc":
        return np.array([[0.0, -x, x], [x, 0.0, -x], [-x, x, 0.0]])
    raise ValueError(f"unknown wing shape {wing!r}")


def simplified_wrench(u: np.ndarray, params: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """Body force and moment ``(F_b u, M_b u)``."""
    F_b, M_b = input_matrices(params)
    return F_b @ u, M_b @ u


def airspeed_norm(v_b: np.ndarray, omega_b: np.ndarray, params: VehicleParams) -> float:
    """``sqrt(|v_b|^2 + mu c^2 |omega_b|^2)``."""
    return float(np.sqrt(v_b @ v_b + params.mu * params.c**2 * (omega_b @ omega_b)))


def augmented_wrench(
    u_prime: np.ndarray, v_b: np.ndarray, omega_b: np.ndarray, params: VehicleParams
) -> tuple[np.ndarray, np.ndarray]:
    """Body force and moment including the free-stream terms.

    ``u_prime`` is the virtual command ``[T1+T2, T1-T2, d1+d2, d1-d2]``.
    """
    t_sum, t_diff, d_sum, d_diff = u_prime
    k = params.k_wet
    Cl, Cd0 = params.C_l, params.C_d0
    xf, xm, ay, dr = params.xi_f, params.xi_m, params.a_y, params.delta_r
    qa = 0.25 * params.rho * params.S * airspeed_norm(v_b, omega_b, params)
    vx, vz = v_b[0], v_b[2]
    # delta1*T1 +/- delta2*T2 in virtual coordinates
    dt_plus = 0.5 * (t_sum * d_sum + t_diff * d_diff)
    dt_minus = 0.5 * (t_sum * d_diff + t_diff * d_sum)

    fx = (1.0 - k * Cd0) * t_sum - 2.0 * qa * Cd0 * vx + qa * xf * Cd0 * vz * d_sum
    fz = -k * Cl * xf * dt_plus - 2.0 * qa * Cl * vz - qa * xf * Cl * vx * d_sum
    mx = (
        params.k_m / params.k_f * t_diff
        - k * ay * Cl * xf * dt_minus
        - qa * ay * Cl * xf * vx * d_diff
    )
    my = dr * Cl * (k * xm * dt_plus + qa * xm * vx * d_sum + 2.0 * qa * vz)
    mz = -(params.p_y - k * ay * Cd0) * t_diff - qa * ay * Cd0 * xf * vz * d_diff
    return np.array([fx, 0.0, fz]), np.array([mx, my, mz])


def body_wrench(
    u: np.ndarray,
    v_b: np.ndarray,
    omega_b: np.ndarray,
    params: VehicleParams,
    model: str = "augmented",
) -> tuple[np.ndarray, np.ndarray]:
    """Wrench for an effective command under either model."""
    if model == "simplified":
        return simplified_wrench(u, params)
    if model == "augmented":
        return augmented_wrench(virtual_from_effective(u), v_b, omega_b, params)
    raise ValueError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# State


def pack_state(p, v, q, omega_b) -> np.ndarray:
    return np.concatenate((p, v, q, omega_b)).astype(float)


def unpack_state(x: np.ndarray):
    return x[0:3], x[3:6], x[6:10], x[10:13]


def state_deriv(
    x: np.ndarray,
    u: np.ndarray,
    params: VehicleParams,
    wind: np.ndarray | None = None,
    model: str = "augmented",
) -> np.ndarray:
    """Time derivative of ``x = [p, v, q, omega_b]`` under an effective command."""
    p, v, q, w = unpack_state(x)
    R = rot_from_quat(q)
    air = v if wind is None else v - wind
    v_b = R.T @ air
    force, moment = body_wrench(u, v_b, w, params, model)
    J = params.J
    dv = R @ force / params.m + params.gravity
    dw = np.linalg.solve(J, moment - np.cross(w, J @ w))
    return np.concatenate((v, dv, quat_deriv(q, w), dw))


def renormalize_state(x: np.ndarray) -> np.ndarray:
    out = np.array(x, dtype=float)
    out[6:10] = normalize(out[6:10])
    return out
