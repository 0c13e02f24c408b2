"""Continuous-time LQR synthesis and the associated Lyapunov function.

The Riccati equation is solved by Kleinman's Newton iteration. Each
step is a Lyapunov equation, solved here as a dense Kronecker-form
linear system (fine for the n <= 15 systems used in this package).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotStabilizable(RuntimeError):
    """No stabilizing gain could be constructed or the iteration diverged."""


@dataclass(frozen=True)
class LqrWeights:
    Q: np.ndarray
    R: np.ndarray
    N: np.ndarray | None = None

    def __post_init__(self) -> None:
        Q, R = np.asarray(self.Q), np.asarray(self.R)
        if not np.allclose(Q, Q.T) or np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be symmetric positive semidefinite")
        if not np.allclose(R, R.T) or np.min(np.linalg.eigvalsh(R)) <= 0:
            raise ValueError("R must be symmetric positive definite")

    def cross(self, n: int, m: int) -> np.ndarray:
        return np.zeros((n, m)) if self.N is None else np.asarray(self.N, dtype=float)


@dataclass(frozen=True)
class LqrDesign:
    K: np.ndarray
    S: np.ndarray
    closed_loop_eigs: np.ndarray
    iterations: int


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A^T X + X A + Q = 0`` for ``X``."""
    n = A.shape[0]
    I = np.eye(n)
    # vec(A^T X + X A) = (I kron A^T + A^T kron I) vec(X), column-major vec
    L = np.kron(I, A.T) + np.kron(A.T, I)
    x = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    X = x.reshape(n, n, order="F")
    return 0.5 * (X + X.T)


def stabilizing_gain(A: np.ndarray, B: np.ndarray, margin: float = 1.0) -> np.ndarray:
    """Initial stabilizing gain by Bass's shifted-Lyapunov construction.

    With ``beta > 0`` large enough that ``A + beta I`` is anti-stable,
    ``P`` solving ``(A + beta I) P + P (A + beta I)^T = 2 B B^T`` is
    positive definite for a controllable pair and ``K = B^T P^-1`` gives
    ``(A - BK) P + P (A - BK)^T = -2 beta P``, so ``A - BK`` is Hurwitz.
    """
    n = A.shape[0]
    beta = max(0.0, -np.min(np.linalg.eigvals(A).real)) + margin
    As = A + beta * np.eye(n)
    # (-As) P + P (-As)^T + 2 B B^T = 0
    P = solve_lyapunov(-As.T, 2.0 * B @ B.T)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise NotStabilizable("pair (A, B) is not controllable") from exc
    return B.T @ np.linalg.inv(P)


def care_residual(A, B, weights: LqrWeights, S) -> np.ndarray:
    n, m = B.shape
    N = weights.cross(n, m)
    G = S @ B + N
    return A.T @ S + S @ A - G @ np.linalg.solve(weights.R, G.T) + weights.Q


def solve_care(
    A: np.ndarray,
    B: np.ndarray,
    weights: LqrWeights,
    K0: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> LqrDesign:
    """LQR gain and Riccati solution by Kleinman's iteration.

    Minimizes ``int x'Qx + u'Ru + 2 x'Nu dt`` for ``x' = Ax + Bu`` with
    ``u = -K x``.

    Raises
    ------
    NotStabilizable
        If no stabilizing initial gain exists or the iteration fails.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, m = B.shape
    Q, R = np.asarray(weights.Q, float), np.asarray(weights.R, float)
    N = weights.cross(n, m)
    K = stabilizing_gain(A, B) if K0 is None else np.asarray(K0, dtype=float)
    if np.max(np.linalg.eigvals(A - B @ K).real) >= 0:
        raise NotStabilizable("initial gain is not stabilizing")
    S_prev = None
    for it in range(1, max_iter + 1):
        Acl = A - B @ K
        S = solve_lyapunov(Acl, Q + K.T @ R @ K - N @ K - K.T @ N.T)
        K = np.linalg.solve(R, B.T @ S + N.T)
        if S_prev is not None and np.linalg.norm(S - S_prev) <= tol * max(1.0, np.linalg.norm(S)):
            break
        S_prev = S
    else:
        raise NotStabilizable("Newton iteration did not converge")
    eigs = np.linalg.eigvals(A - B @ K)
    if np.max(eigs.real) >= 0:
        raise NotStabilizable("converged gain is not stabilizing")
    return LqrDesign(K, S, eigs, it)


def augment_integrator(
    A: np.ndarray, B: np.ndarray, select: tuple[int, ...] = (0, 1, 2)
) -> tuple[np.ndarray, np.ndarray]:
    """Append integrators ``x_i' = p_ref - p`` on the selected state rows."""
    n, m = B.shape
    k = len(select)
    C = np.zeros((k, n))
    C[np.arange(k), list(select)] = 1.0
    A_aug = np.zeros((n + k, n + k))
    A_aug[:n, :n] = A
    A_aug[n:, :n] = -C
    B_aug = np.vstack((B, np.zeros((k, m))))
    return A_aug, B_aug


def lyapunov_value(S: np.ndarray, delta_x: np.ndarray) -> float:
    """Quadratic form ``dx' S dx``."""
    return float(delta_x @ S @ delta_x)


def expand_gain_with_scalar_part(K: np.ndarray, eta_index: int = 6) -> np.ndarray:
    """Insert a zero column for the quaternion scalar part.

    The reduced design acts on ``eps`` only, so the full-quaternion gain
    has an identically zero column at ``eta_index``.
    """
    return np.insert(K, eta_index, 0.0, axis=1)


@dataclass(frozen=True)
class LqrHover:
    """Hover LQR law ``u = u_eq - K dx`` around a movable position target.

    ``dx`` is the 12-state deviation ``[p - p_t, v, eps - eps_eq, omega]``.
    With ``K_i`` set, ``u`` also includes ``-K_i xi`` where ``xi`` integrates
    ``p_t - p``.
    """

    design: LqrDesign
    x_eq: np.ndarray
    u_eq: np.ndarray
    K_i: np.ndarray | None = None

    def deviation(self, x: np.ndarray, target: np.ndarray) -> np.ndarray:
        q = x[6:10]
        if q @ self.x_eq[6:10] < 0:
            q = -q
        return np.concatenate(
            (x[0:3] - target, x[3:6], q[1:] - self.x_eq[7:10], x[10:13])
        )

    def value(self, x: np.ndarray, target: np.ndarray) -> float:
        """Lyapunov value ``dx' S dx`` on the 12-state block of ``S``."""
        dx = self.deviation(x, target)
        return lyapunov_value(self.design.S[:12, :12], dx)

    def command(self, x: np.ndarray, target: np.ndarray, xi: np.ndarray | None = None) -> np.ndarray:
        K = self.design.K
        u = self.u_eq - K[:, :12] @ self.deviation(x, target)
        if self.K_i is not None and xi is not None:
            u = u - self.K_i @ xi
        return u


def hover_lqr(
    A: np.ndarray,
    B: np.ndarray,
    x_eq: np.ndarray,
    u_eq: np.ndarray,
    weights: LqrWeights,
    integrator: bool = False,
) -> LqrHover:
    """Design an :class:`LqrHover` from a 12-state hover linearization."""
    if integrator:
        A_aug, B_aug = augment_integrator(A, B)
        design = solve_care(A_aug, B_aug, weights)
        return LqrHover(design, x_eq, u_eq, design.K[:, 12:])
    return LqrHover(solve_care(A, B, weights), x_eq, u_eq)
