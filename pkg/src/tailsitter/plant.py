"""Plant integration and the actuator layer shared by all closed loops."""

from __future__ import annotations

import numpy as np

from tailsitter.vehicle import (
    ActuatorLimits,
    VehicleParams,
    effective_from_physical,
    physical_from_effective,
    renormalize_state,
    saturate_command,
    state_deriv,
)

STATE_NAMES = ("p_x", "p_y", "p_z", "v_x", "v_y", "v_z", "q_0", "q_1", "q_2", "q_3",
               "w_x", "w_y", "w_z")


class NonFinite(FloatingPointError):
    """The state became non-finite; the message names the component."""


def rk4_step(
    x: np.ndarray,
    u: np.ndarray,
    dt: float,
    params: VehicleParams,
    wind: np.ndarray | None = None,
    model: str = "augmented",
) -> np.ndarray:
    """Classical RK4 step with the effective command held constant.

    Raises
    ------
    NonFinite
        If any component of the new state is not finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = state_deriv(x, u, params, wind, model)
    k2 = state_deriv(x + 0.5 * dt * k1, u, params, wind, model)
    k3 = state_deriv(x + 0.5 * dt * k2, u, params, wind, model)
    k4 = state_deriv(x + dt * k3, u, params, wind, model)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise NonFinite(f"state component {STATE_NAMES[bad[0]]} is not finite")
    return renormalize_state(out)


def actuate(
    u: np.ndarray,
    prev_phys: np.ndarray | None,
    dt: float,
    params: VehicleParams,
    limits: ActuatorLimits,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Pass an effective command through the actuator limits.

    Returns the applied physical command ``[omega1, omega2, delta1, delta2]``,
    the corresponding effective command and whether any limit was active.
    With no previous command only the position limits apply.
    """
    raw = physical_from_effective(u, params, None if prev_phys is None else prev_phys[2:])
    if prev_phys is None:
        lo = np.array([limits.omega_min] * 2 + [-limits.delta_max] * 2)
        hi = np.array([limits.omega_max] * 2 + [limits.delta_max] * 2)
        phys = np.clip(raw, lo, hi)
    else:
        phys = saturate_command(raw, prev_phys, dt, limits)
    active = bool(np.any(np.abs(phys - raw) > 1e-9))
    return phys, effective_from_physical(phys, params), active
