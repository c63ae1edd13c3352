"""Inner integration loops of the Riccati pass and the closed-loop sweep.

Both kernels run classical fixed-step RK4 against precomputed half-step
coefficient tables (index 2i is node i, odd indices are interval midpoints).
They are JIT-compiled with numba when available; the numpy fallbacks are
op-for-op identical so results do not depend on which path runs.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _ric_rhs(y, A, At, B, Q, S, RB, RSt, q, Rr):
    # y = [vec(P), p]; returns the backward Riccati pair's time derivative.
    n = A.shape[0]
    P = y[: n * n].reshape(n, n)
    p = y[n * n :]
    G = P @ B + S
    dP = Q + At @ P + P @ A - G @ (RB @ P + RSt)
    dp = q + At @ p - G @ (RB @ p + Rr)
    out = np.empty(y.shape[0])
    out[: n * n] = -dP.reshape(n * n)
    out[n * n :] = -dp
    return out


@njit(cache=True)
def riccati_backward(A, B, Q_t, S_t, RB_t, RSt_t, q_t, Rr_t, h, y_terminal):
    """Backward RK4 over the whole grid; returns [vec(P), p] at every node
    with the P block re-symmetrized after each step."""
    n = A.shape[0]
    n_steps = (Q_t.shape[0] - 1) // 2
    At = np.ascontiguousarray(A.T)
    out = np.empty((n_steps + 1, y_terminal.shape[0]))
    y = y_terminal.copy()
    out[n_steps] = y
    for i in range(n_steps, 0, -1):
        s = 2 * i
        k1 = _ric_rhs(y, A, At, B, Q_t[s], S_t[s], RB_t[s], RSt_t[s], q_t[s], Rr_t[s])
        y2 = y - (0.5 * h) * k1
        k2 = _ric_rhs(y2, A, At, B, Q_t[s - 1], S_t[s - 1], RB_t[s - 1], RSt_t[s - 1], q_t[s - 1], Rr_t[s - 1])
        y3 = y - (0.5 * h) * k2
        k3 = _ric_rhs(y3, A, At, B, Q_t[s - 1], S_t[s - 1], RB_t[s - 1], RSt_t[s - 1], q_t[s - 1], Rr_t[s - 1])
        y4 = y - h * k3
        k4 = _ric_rhs(y4, A, At, B, Q_t[s - 2], S_t[s - 2], RB_t[s - 2], RSt_t[s - 2], q_t[s - 2], Rr_t[s - 2])
        y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for a in range(n):
            for b in range(a):
                v = 0.5 * (y[a * n + b] + y[b * n + a])
                y[a * n + b] = v
                y[b * n + a] = v
        out[i - 1] = y
    return out


@njit(cache=True)
def affine_forward(Acl_t, ff_t, h, x_init):
    """Forward RK4 for xdot = Acl(t) x + ff(t) over the whole grid."""
    n_steps = (Acl_t.shape[0] - 1) // 2
    out = np.empty((n_steps + 1, x_init.shape[0]))
    x = x_init.copy()
    out[0] = x
    for i in range(n_steps):
        s = 2 * i
        k1 = Acl_t[s] @ x + ff_t[s]
        k2 = Acl_t[s + 1] @ (x + (0.5 * h) * k1) + ff_t[s + 1]
        k3 = Acl_t[s + 1] @ (x + (0.5 * h) * k2) + ff_t[s + 1]
        k4 = Acl_t[s + 2] @ (x + h * k3) + ff_t[s + 2]
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x
    return out
