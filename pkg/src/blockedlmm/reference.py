"""Brute-force dense oracles for small problems.

These use plain ``n x n`` and ``q x q`` dense algebra and share no code
with the blocked engine, so a disagreement between the two points at the
engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_N = 500
MAX_OMEGA = 1000


def _check_n(n: int) -> None:
    if n > MAX_N:
        raise ValueError(f"dense oracle limited to n <= {MAX_N}, got {n}")


def _gls(X: np.ndarray, y: np.ndarray, V: np.ndarray):
    Vinv_X = np.linalg.solve(V, X)
    Vinv_y = np.linalg.solve(V, y)
    XtViX = X.T @ Vinv_X
    beta = np.linalg.solve(XtViX, X.T @ Vinv_y) if X.shape[1] else np.empty(0)
    r = y - X @ beta
    rss = float(r @ np.linalg.solve(V, r))
    return beta, rss, XtViX


def dense_objective(
    X: np.ndarray, y: np.ndarray, Z: np.ndarray, Lam: np.ndarray, reml: bool = False
) -> float:
    """Negative twice the profiled log-likelihood from the marginal covariance.

    ``V = Z Lam Lam' Z' + I``; ``beta`` is the GLS estimate and the residual
    variance is profiled out.  With ``reml`` the REML criterion is returned,
    which adds ``log det(X' V^-1 X)`` and uses ``n - p`` degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    _check_n(n)
    ZL = np.asarray(Z, dtype=float) @ np.asarray(Lam, dtype=float)
    V = ZL @ ZL.T + np.eye(n)
    beta, rss, XtViX = _gls(X, y, V)
    _, logdetV = np.linalg.slogdet(V)
    if reml:
        dof = n - p
        _, logdetX = np.linalg.slogdet(XtViX) if p else (1.0, 0.0)
        return float(logdetV + logdetX + dof * (1 + np.log(2 * np.pi * rss / dof)))
    return float(logdetV + n * (1 + np.log(2 * np.pi * rss / n)))


def dense_omega(A: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    """``Omega``: ``A`` with its random-effects rows/columns scaled by ``Lam``
    and the random-effects diagonal block inflated by the identity."""
    A = np.asarray(A, dtype=float)
    q = Lam.shape[0]
    m = A.shape[0]
    if m > MAX_OMEGA:
        raise ValueError(f"dense oracle limited to {MAX_OMEGA} rows, got {m}")
    T = np.eye(m)
    T[:q, :q] = Lam
    Om = T.T @ A @ T
    Om[:q, :q] += np.eye(q)
    return Om


def dense_omega_chol(A: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    """Dense lower Cholesky factor of ``Omega``."""
    return np.linalg.cholesky(dense_omega(A, Lam))


@dataclass
class PLSSolution:
    u: np.ndarray
    beta: np.ndarray
    r2: float


def dense_pls(
    X: np.ndarray,
    y: np.ndarray,
    Z: np.ndarray,
    Lam: np.ndarray,
    beta: np.ndarray | None = None,
) -> PLSSolution:
    """Minimize ``||y - X beta - Z Lam u||^2 + ||u||^2`` by normal equations.

    With ``beta`` given only ``u`` is optimized; otherwise ``u`` and
    ``beta`` are optimized jointly.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    ZL = np.asarray(Z, dtype=float) @ np.asarray(Lam, dtype=float)
    q = ZL.shape[1]
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        r0 = y - X @ beta
        u = np.linalg.solve(ZL.T @ ZL + np.eye(q), ZL.T @ r0)
    else:
        W = np.hstack([ZL, X])
        P = np.zeros((W.shape[1], W.shape[1]))
        P[:q, :q] = np.eye(q)
        sol = np.linalg.solve(W.T @ W + P, W.T @ y)
        u, beta = sol[:q], sol[q:]
    r = y - X @ beta - ZL @ u
    return PLSSolution(u=u, beta=beta, r2=float(r @ r + u @ u))


def ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares coefficients and residual sum of squares."""
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return beta, float(r @ r)
