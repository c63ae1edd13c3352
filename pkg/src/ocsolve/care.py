"""Continuous-time algebraic Riccati equation solver.

A stabilizing seed is produced by integrating the differential Riccati
equation backward over a progressively doubled horizon (value iteration,
which converges exponentially in the stabilizable directions and is exact in
directions the cost never sees), then refined by Newton-Kleinman iterations,
each solving one Lyapunov equation.  Convergence is judged on the residual of
the algebraic equation itself.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.linalg as sla

from .exceptions import AreSolveFailed

log = logging.getLogger("ocsolve")


def are_residual(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, P: np.ndarray) -> float:
    """Max-abs residual of A'P + PA - PBR^{-1}B'P + Q."""
    K = np.linalg.solve(R, B.T @ P)
    return float(np.abs(A.T @ P + P @ A - P @ B @ K + Q).max())


def _dre_backward(A, B, Q, Rinv, P, span: float, h: float) -> np.ndarray:
    """Advance the backward Riccati flow by `span` using fixed-step RK4."""
    nsteps = max(1, int(np.ceil(span / h)))
    hh = span / nsteps

    def f(P):
        return -(Q + A.T @ P + P @ A - P @ B @ Rinv @ B.T @ P)

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(nsteps):
            k1 = f(P)
            k2 = f(P - 0.5 * hh * k1)
            k3 = f(P - 0.5 * hh * k2)
            k4 = f(P - hh * k3)
            P = P - (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            P = 0.5 * (P + P.T)
            if not np.all(np.isfinite(P)):
                raise AreSolveFailed("backward Riccati integration blew up")
    return P


def solve_care(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-10,
    max_horizon: float = 512.0,
    nk_max_iters: int = 40,
) -> np.ndarray:
    """Solve A'P + PA - PBR^{-1}B'P + Q = 0 for the stabilizing P >= 0.

    Raises AreSolveFailed if neither the integration seed nor the
    Newton-Kleinman refinement reaches the residual tolerance.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    Rinv = np.linalg.inv(R)

    # RK4 stability on the Riccati flow needs h below ~1/||A||-scale.
    h = 0.2 / (1.0 + float(np.linalg.norm(A, 2)))
    P = np.zeros((n, n))
    span = 1.0
    horizon = 0.0
    best = P
    best_res = are_residual(A, B, Q, R, P)
    while horizon < max_horizon:
        P = _dre_backward(A, B, Q, Rinv, P, span, h)
        horizon += span
        span *= 2.0
        res = are_residual(A, B, Q, R, P)
        log.debug("care seed: horizon %.1f residual %.3e", horizon, res)
        if res < best_res:
            best, best_res = P, res
        if res < max(tol, 1e-12):
            return 0.5 * (P + P.T)
        if res < 1e-4 * (1.0 + float(np.abs(Q).max())):
            break

    P = best
    for it in range(nk_max_iters):
        K = np.linalg.solve(R, B.T @ P)
        Acl = A - B @ K
        with warnings.catch_warnings():
            # Marginal closed-loop modes make the Lyapunov solve ill
            # conditioned; the residual check below decides acceptance.
            warnings.simplefilter("ignore")
            try:
                Pn = sla.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
            except Exception:
                break
        if not np.all(np.isfinite(Pn)):
            break
        Pn = 0.5 * (Pn + Pn.T)
        res = are_residual(A, B, Q, R, Pn)
        log.debug("care refine %d: residual %.3e", it, res)
        if res >= best_res:
            break
        best, best_res = Pn, res
        P = Pn
        if res < tol:
            break

    if best_res > tol:
        raise AreSolveFailed(
            f"algebraic Riccati residual stalled at {best_res:.3e} (tolerance {tol:.1e})"
        )
    return best
