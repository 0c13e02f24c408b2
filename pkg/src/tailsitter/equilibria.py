"""Hover equilibrium, level-flight trim and linearization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tailsitter.mathkin import normalize, rot_from_quat
from tailsitter.vehicle import (
    VehicleParams,
    effective_from_virtual,
    input_matrices,
    pack_state,
    state_deriv,
)

HOVER_LAYOUT = ("p_x", "p_y", "p_z", "v_x", "v_y", "v_z", "eps_1", "eps_2", "eps_3",
                "w_x", "w_y", "w_z")
FLIGHT_LAYOUT = ("p_z", "v_x", "v_y", "v_z", "eps_1", "eps_2", "eps_3", "w_x", "w_y", "w_z")
COMMAND_LAYOUT = ("u1", "u2", "u3", "u4")


class NoConvergence(RuntimeError):
    """Raised when the trim solver fails; carries the last residual norm."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class EquilibriumPoint:
    x_eq: np.ndarray
    u_eq: np.ndarray
    residual_norm: float


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    layout: tuple[str, ...]
    equilibrium: EquilibriumPoint


def hover_thrust_scale(params: VehicleParams) -> float:
    """``m g / (1 - S_wet C_d0 / (4 S_p))``, the total hover thrust."""
    return params.m * params.g / (1.0 - params.k_wet * params.C_d0)


def hover_quaternion(params: VehicleParams) -> np.ndarray:
    """Nose-up attitude with zero heading: the body x axis points up."""
    s = 1.0 / np.sqrt(2.0)
    sign = -1.0 if params.frame == "z_up" else 1.0
    return np.array([s, 0.0, sign * s, 0.0])


def hover_equilibrium(
    params: VehicleParams, p_target: np.ndarray | None = None, model: str = "augmented"
) -> EquilibriumPoint:
    """Hover fixed point at ``p_target``.

    Each motor carries half of :func:`hover_thrust_scale`; the command
    lies in the kernel of ``M_b``.
    """
    p = np.zeros(3) if p_target is None else np.asarray(p_target, dtype=float)
    lam = hover_thrust_scale(params)
    u = 0.5 * lam * np.array([1.0, 1.0, 0.0, 0.0])
    x = pack_state(p, np.zeros(3), hover_quaternion(params), np.zeros(3))
    res = float(np.linalg.norm(state_deriv(x, u, params, model=model)))
    return EquilibriumPoint(x, u, res)


def _pitch_quat(eps2: float) -> np.ndarray:
    return np.array([np.sqrt(max(0.0, 1.0 - eps2**2)), 0.0, eps2, 0.0])


def _trim_residual(z: np.ndarray, params: VehicleParams, airspeed: float) -> np.ndarray:
    eps2, t_sum, d_sum = z
    x = pack_state(np.zeros(3), [airspeed, 0.0, 0.0], _pitch_quat(eps2), np.zeros(3))
    u = effective_from_virtual(np.array([t_sum, 0.0, d_sum, 0.0]))
    dx = state_deriv(x, u, params, model="augmented")
    return np.array([dx[3], dx[5], dx[11]])


def _trim_newton(z, params, airspeed, tol, max_iter):
    r = _trim_residual(z, params, airspeed)
    h = np.array([1e-7, 1e-6, 1e-7])
    for _ in range(max_iter):
        nr = np.linalg.norm(r)
        if nr < tol:
            break
        Jac = np.empty((3, 3))
        for j in range(3):
            dz = np.zeros(3)
            dz[j] = h[j]
            Jac[:, j] = (_trim_residual(z + dz, params, airspeed)
                         - _trim_residual(z - dz, params, airspeed)) / (2 * h[j])
        step = np.linalg.solve(Jac, -r)
        alpha = 1.0
        accepted = False
        while alpha > 1e-4:
            z_new = z + alpha * step
            if abs(z_new[0]) < 1.0:
                r_new = _trim_residual(z_new, params, airspeed)
                if np.linalg.norm(r_new) < (1 - 1e-4 * alpha) * nr:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
        z, r = z_new, r_new
    return z, float(np.linalg.norm(r))


def trim_level_flight(
    params: VehicleParams,
    airspeed: float,
    tol: float = 1e-10,
    max_iter: int = 100,
    alpha0: float = np.radians(10.0),
) -> EquilibriumPoint:
    """Symmetric level-flight trim of the augmented model.

    Solves for the pitch quaternion component, ``T1+T2`` and
    ``delta1+delta2`` by damped Newton iteration with a finite-difference
    Jacobian. The initial guess is the hover attitude pitched down by
    ``alpha0``; if Newton fails from there the solution is continued from
    5 m/s in 1 m/s increments.

    Raises
    ------
    NoConvergence
        If the residual does not fall below ``tol``.
    """
    if airspeed <= 0:
        raise ValueError("airspeed must be positive")
    sign = -1.0 if params.frame == "z_up" else 1.0
    theta0 = np.pi / 2 - alpha0
    z0 = np.array([sign * np.sin(theta0 / 2), hover_thrust_scale(params), 0.0])
    z, nr = _trim_newton(z0, params, airspeed, tol, max_iter)
    if nr >= tol and airspeed > 5.0:
        z = z0
        for speed in np.append(np.arange(5.0, airspeed, 1.0), airspeed):
            z, nr = _trim_newton(z, params, speed, tol, max_iter)
    if nr >= tol:
        raise NoConvergence("trim did not converge", nr)
    x = pack_state(np.zeros(3), [airspeed, 0.0, 0.0], _pitch_quat(z[0]), np.zeros(3))
    u = effective_from_virtual(np.array([z[1], 0.0, z[2], 0.0]))
    full = float(np.linalg.norm(state_deriv(x, u, params, model="augmented")[3:]))
    return EquilibriumPoint(x, u, full)


def linearize_analytic_hover(params: VehicleParams) -> LinearModel:
    """Closed-form hover Jacobians on the ``[p, v, eps, omega]`` layout.

    The scalar part of the quaternion is eliminated through the unit norm
    before differentiating.
    """
    eq = hover_equilibrium(params)
    g = params.g
    eta, e2 = eq.x_eq[6], eq.x_eq[8]
    # thrust acceleration at hover equals g along the body x axis
    A_ve = g * np.array(
        [
            [0.0, -4.0 * e2, 0.0],
            [2.0 * e2, 0.0, 2.0 * eta],
            [0.0, -2.0 * (eta - e2**2 / eta), 0.0],
        ]
    )
    A_qw = 0.5 * np.array([[eta, 0.0, e2], [0.0, eta, 0.0], [-e2, 0.0, eta]])
    A = np.zeros((12, 12))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 6:9] = A_ve
    A[6:9, 9:12] = A_qw
    F_b, M_b = input_matrices(params)
    B = np.zeros((12, 4))
    B[3:6] = rot_from_quat(eq.x_eq[6:10]) @ F_b / params.m
    B[9:12] = np.linalg.solve(params.J, M_b)
    return LinearModel(A, B, HOVER_LAYOUT, eq)


def _reduced_to_full(z: np.ndarray, eq: EquilibriumPoint, layout: str) -> np.ndarray:
    x = eq.x_eq.copy()
    if layout == "hover":
        p, v, eps, w = z[0:3], z[3:6], z[6:9], z[9:12]
        x[0:3] = p
    else:
        v, eps, w = z[1:4], z[4:7], z[7:10]
        x[2] = z[0]
    eta_sign = 1.0 if eq.x_eq[6] >= 0 else -1.0
    eta = eta_sign * np.sqrt(1.0 - eps @ eps)
    x[3:6] = v
    x[6:10] = np.concatenate(([eta], eps))
    x[10:13] = w
    return x


def _full_to_reduced(dx: np.ndarray, layout: str) -> np.ndarray:
    if layout == "hover":
        return np.concatenate((dx[0:6], dx[7:10], dx[10:13]))
    return np.concatenate(([dx[2]], dx[3:6], dx[7:10], dx[10:13]))


def reduce_state(x: np.ndarray, layout: str = "hover") -> np.ndarray:
    if layout == "hover":
        return np.concatenate((x[0:6], x[7:10], x[10:13]))
    return np.concatenate(([x[2]], x[3:6], x[7:10], x[10:13]))


def linearize_fd(
    params: VehicleParams,
    eq: EquilibriumPoint,
    model: str = "augmented",
    layout: str = "hover",
) -> LinearModel:
    """Central-difference Jacobians of :func:`state_deriv` at ``eq``.

    ``layout`` is ``"hover"`` (12 states) or ``"flight"``
    (``[p_z, v, eps, omega]``, 10 states).
    """
    names = HOVER_LAYOUT if layout == "hover" else FLIGHT_LAYOUT
    z0 = reduce_state(eq.x_eq, layout)
    n = len(z0)
    steps = np.full(n, 1e-6)
    eps_slice = slice(6, 9) if layout == "hover" else slice(4, 7)
    steps[eps_slice] = 1e-7

    def f(z, u):
        x = _reduced_to_full(z, eq, layout)
        return _full_to_reduced(state_deriv(x, u, params, model=model), layout)

    A = np.empty((n, n))
    for j in range(n):
        dz = np.zeros(n)
        dz[j] = steps[j]
        A[:, j] = (f(z0 + dz, eq.u_eq) - f(z0 - dz, eq.u_eq)) / (2 * steps[j])
    B = np.empty((n, 4))
    for j in range(4):
        du = np.zeros(4)
        du[j] = 1e-6
        B[:, j] = (f(z0, eq.u_eq + du) - f(z0, eq.u_eq - du)) / 2e-6
    return LinearModel(A, B, names, eq)


def unit_quat_from_reduced(eps: np.ndarray, eta_sign: float = 1.0) -> np.ndarray:
    return normalize(np.concatenate(([eta_sign * np.sqrt(max(0.0, 1 - eps @ eps))], eps)))
