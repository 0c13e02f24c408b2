"""Hybrid flow/jump simulation and the hover/flight mode supervisor.

A generic fixed-step hybrid integrator with generalized time ``(t, j)`` is
provided for small test systems. The vehicle supervisor switches among the
nonlinear hover law, the hover LQR and the flight controller, using a
Lyapunov level set with hysteresis between the two hover modes and the
distance to target for flight.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from tailsitter import flight_ctl, hover_ctl
from tailsitter.lqr import LqrHover
from tailsitter.plant import actuate, rk4_step
from tailsitter.vehicle import (
    ActuatorLimits,
    VehicleParams,
    input_matrices,
    virtual_from_effective,
)


@dataclass(frozen=True, order=True)
class HybridTime:
    """Generalized time: continuous ``t`` and jump counter ``j``."""

    t: float = 0.0
    j: int = 0

    def flow(self, dt: float) -> "HybridTime":
        return HybridTime(self.t + dt, self.j)

    def jump(self) -> "HybridTime":
        return HybridTime(self.t, self.j + 1)


def simulate_hybrid(
    flow: Callable[[np.ndarray], np.ndarray],
    in_jump_set: Callable[[np.ndarray], bool],
    jump_map: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    dt: float,
    t_end: float,
    max_jumps: int = 1000,
) -> tuple[list[HybridTime], list[np.ndarray]]:
    """Fixed-step hybrid trajectory with jump priority.

    Each step first applies the jump map while the state is in the jump
    set, then flows for ``dt`` with RK4.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float)
    ht = HybridTime()
    times, states = [ht], [x]
    while ht.t < t_end - 1e-12:
        if in_jump_set(x) and ht.j < max_jumps:
            x = np.asarray(jump_map(x), dtype=float)
            ht = ht.jump()
        else:
            k1 = flow(x)
            k2 = flow(x + 0.5 * dt * k1)
            k3 = flow(x + 0.5 * dt * k2)
            k4 = flow(x + dt * k3)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            ht = ht.flow(dt)
        times.append(ht)
        states.append(x)
    return times, states


class Mode(enum.Enum):
    NL_HOVER = "NL_HOVER"
    LIN_HOVER = "LIN_HOVER"
    FLIGHT = "FLIGHT"


@dataclass(frozen=True)
class SupervisorConfig:
    """Switching thresholds.

    Linear hover is entered below ``v_enter`` and left above ``v_exit``.
    Flight is requested beyond ``d_flight`` metres from the target once the
    speed exceeds ``v_min_flight``.
    """

    v_enter: float = 250.0
    v_exit: float = 400.0
    d_flight: float = 50.0
    v_min_flight: float = 0.5

    def __post_init__(self) -> None:
        if not self.v_enter < self.v_exit:
            raise ValueError("v_enter must be below v_exit")
        if self.d_flight <= 0:
            raise ValueError("d_flight must be positive")


def supervisor_jump(mode: Mode, V: float, dist_to_target: float, speed: float, cfg: SupervisorConfig) -> Mode:
    """Next mode; at most one transition per call."""
    if V < 0:
        raise ValueError("V must be non-negative")
    if mode is Mode.FLIGHT:
        return Mode.NL_HOVER if dist_to_target <= cfg.d_flight else mode
    if dist_to_target > cfg.d_flight and speed > cfg.v_min_flight:
        return Mode.FLIGHT
    if mode is Mode.NL_HOVER and V < cfg.v_enter:
        return Mode.LIN_HOVER
    if mode is Mode.LIN_HOVER and V > cfg.v_exit:
        return Mode.NL_HOVER
    return mode


@dataclass(frozen=True)
class JumpRecord:
    t: float
    j: int
    from_mode: Mode
    to_mode: Mode
    V: float


@dataclass(frozen=True)
class Controllers:
    """Everything the hybrid loop needs besides the plant state."""

    lqr: LqrHover
    hover_gains: hover_ctl.HoverGains
    flight_gains: flight_ctl.FlightGains
    v_cruise: float = 20.0


@dataclass(frozen=True)
class HybridState:
    x: np.ndarray
    mode: Mode
    time: HybridTime
    hover: hover_ctl.HoverCtlState
    flight: flight_ctl.FlightCtlState
    phys: np.ndarray | None = None
    u: np.ndarray | None = None


@dataclass(frozen=True)
class StepInfo:
    u: np.ndarray
    phys: np.ndarray
    V: float
    kappa: float
    saturated: bool


def initial_state(x: np.ndarray, mode: Mode, params: VehicleParams) -> HybridState:
    return HybridState(
        np.asarray(x, dtype=float), mode, HybridTime(),
        hover_ctl.init_state(x, params), flight_ctl.FlightCtlState(),
    )


def _handoff(state: HybridState, to: Mode, params: VehicleParams) -> HybridState:
    if to is Mode.NL_HOVER:
        f = params.m * params.g
        if state.u is not None:
            F_b, _ = input_matrices(params)
            f = max(float(np.linalg.norm(F_b @ state.u)), 2.0 * hover_ctl.F_MIN)
        return replace(state, hover=hover_ctl.HoverCtlState(state.x[6:10].copy(), f))
    if to is Mode.FLIGHT:
        u_prime = np.zeros(4) if state.u is None else virtual_from_effective(
            state.u, None if state.phys is None else state.phys[2:])
        return replace(state, flight=flight_ctl.state_from_command(u_prime))
    return state


def hybrid_step(
    state: HybridState,
    target: np.ndarray,
    dt: float,
    cfg: SupervisorConfig,
    ctrl: Controllers,
    params: VehicleParams,
    limits: ActuatorLimits,
    wind: np.ndarray | None = None,
    alloc: tuple[np.ndarray, np.ndarray] | None = None,
    supervise: bool = True,
) -> tuple[HybridState, JumpRecord | None, StepInfo]:
    """Flow one step under the active controller, then check the jump set.

    With ``supervise=False`` the mode is held (single-controller runs).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.x
    kappa = float("nan")
    hover, flight = state.hover, state.flight
    if state.mode is Mode.LIN_HOVER:
        u = ctrl.lqr.command(x, target)
    elif state.mode is Mode.NL_HOVER:
        u, hover = hover_ctl.hover_step(x, hover, target, ctrl.lqr.x_eq[6:10], dt,
                                        ctrl.hover_gains, params, alloc)
    else:
        u, flight = flight_ctl.flight_step(x, flight, target, ctrl.v_cruise, dt,
                                           ctrl.flight_gains, params, limits, wind)
        kappa = flight.kappa
    phys, u_applied, sat = actuate(u, state.phys, dt, params, limits)
    x_new = rk4_step(x, u_applied, dt, params, wind)
    new = HybridState(x_new, state.mode, state.time.flow(dt), hover, flight, phys, u_applied)

    V = ctrl.lqr.value(x_new, target)
    dist = float(np.linalg.norm(x_new[0:3] - target))
    speed = float(np.linalg.norm(x_new[3:6]))
    to = supervisor_jump(state.mode, V, dist, speed, cfg) if supervise else state.mode
    record = None
    if to is not state.mode:
        record = JumpRecord(new.time.t, new.time.j + 1, state.mode, to, V)
        new = _handoff(replace(new, mode=to, time=new.time.jump()), to, params)
    return new, record, StepInfo(u_applied, phys, V, kappa, sat)
