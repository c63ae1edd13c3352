"""Built-in benchmark problems.

Three problems of increasing difficulty: a scalar regulator with a known
closed-form solution, a double integrator with a box-constrained input (small
enough to cross-check against a direct transcription), and an emergency
lane-change maneuver for a linear single-track vehicle model at constant
speed, whose front/rear slip angles and steering angle are constrained
through arctangent output maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .care import solve_care
from .exceptions import AreSolveFailed
from .ocp import (
    ConstraintSet,
    OcpProblem,
    affine_constraints,
    quadratic_cost,
    quadratic_terminal,
)

Vec = np.ndarray


def scalar_lqr_problem(x0: float = 1.0, T: float = 1.0) -> OcpProblem:
    """Scalar regulator: integrator state, unit costs, zero terminal weight."""
    return OcpProblem(
        A=np.zeros((1, 1)),
        B=np.ones((1, 1)),
        x0=np.array([x0]),
        T=T,
        terminal=quadratic_terminal(np.zeros((1, 1))),
        incremental=quadratic_cost(np.eye(1), np.eye(1)),
        constraints=ConstraintSet.empty(1, 1),
    )


def double_integrator_problem(
    umax: float | None = 0.5,
    x0: Vec = (1.0, 0.0),
    T: float = 5.0,
) -> OcpProblem:
    """Double integrator with symmetric input bound |u| <= umax.

    umax=None drops the constraints entirely, leaving a plain quadratic
    regulator with terminal weight equal to the state cost.
    """
    if umax is not None and umax <= 0.0:
        raise ValueError("umax must be positive (or None for unconstrained)")
    if T <= 0.0:
        raise ValueError("T must be positive")
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    if umax is None:
        cs = ConstraintSet.empty(2, 1)
    else:
        cs = affine_constraints(
            C=np.zeros((2, 2)),
            D=np.array([[1.0], [-1.0]]),
            e=np.array([-umax, -umax]),
        )
    return OcpProblem(
        A=A,
        B=B,
        x0=np.asarray(x0, dtype=float),
        T=T,
        terminal=quadratic_terminal(np.eye(2)),
        incremental=quadratic_cost(np.eye(2), np.eye(1)),
        constraints=cs,
    )


@dataclass(frozen=True)
class LaneChangeParams:
    """Vehicle and cost data for the lane-change benchmark.

    State order is (s, yaw, sideslip, yaw rate, steering angle) with the
    steering rate as input; parameters approximate a full-size sedan at 30 m/s.
    Bounds are stored in radians.
    """

    vx: float = 30.0  # [m/s] longitudinal speed
    lf: float = 1.56  # [m] front axle moment arm
    lr: float = 1.64  # [m] rear axle moment arm
    c_alpha: float = 246994.0  # [N/rad] tire cornering stiffness
    mass: float = 2041.0  # [kg]
    izz: float = 4964.0  # [kg m^2] yaw inertia
    horizon: float = 4.0  # [s]
    q_diag: tuple = (1.0, 1.0, 0.0, 0.0, 0.0)
    r_scalar: float = 0.1
    slip_bound: float = math.radians(8.0)  # front/rear slip angle limit
    steer_bound: float = math.radians(30.0)  # steering angle limit

    def __post_init__(self) -> None:
        for name in ("vx", "lf", "lr", "c_alpha", "mass", "izz", "horizon",
                     "r_scalar", "slip_bound", "steer_bound"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


def lane_change_matrices(params: LaneChangeParams) -> tuple[np.ndarray, np.ndarray]:
    """Linearized constant-speed single-track dynamics (A, B)."""
    vx, lf, lr = params.vx, params.lf, params.lr
    ca, m, izz = params.c_alpha, params.mass, params.izz
    A = np.array(
        [
            [0.0, vx, vx, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, -2.0 * ca / (m * vx), ca * (lr - lf) / (m * vx**2) - 1.0, 0.0],
            [0.0, 0.0, ca * (lr - lf) / izz, -ca * (lr**2 + lf**2) / (izz * vx), 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0],
        ]
    )
    B = np.array([[0.0], [0.0], [ca / (m * vx)], [ca * lf / izz], [1.0]])
    return A, B


def lane_change_constraints(params: LaneChangeParams) -> ConstraintSet:
    """Six scalar bounds: +/- on front slip, rear slip, and steering angle.

    Slip angles are arctangent maps of sideslip and yaw rate; gradients and
    per-component Hessians are analytic.
    """
    lfv = params.lf / params.vx
    lrv = params.lr / params.vx
    sb, db = params.slip_bound, params.steer_bound
    wf = np.array([0.0, 0.0, 1.0, lfv, 0.0])  # grad of the front arctan argument
    wr = np.array([0.0, 0.0, 1.0, -lrv, 0.0])
    e_df = np.array([0.0, 0.0, 0.0, 0.0, 1.0])

    def value(x: Vec, u: Vec) -> Vec:
        af = x[4] - math.atan(x[2] + lfv * x[3])
        ar = -math.atan(x[2] - lrv * x[3])
        df = x[4]
        return np.array([af - sb, -af - sb, ar - sb, -ar - sb, df - db, -df - db])

    def gradient_x(x: Vec, u: Vec) -> np.ndarray:
        gf = x[2] + lfv * x[3]
        gr = x[2] - lrv * x[3]
        daf = e_df - wf / (1.0 + gf * gf)
        dar = -wr / (1.0 + gr * gr)
        return np.stack([daf, -daf, dar, -dar, e_df, -e_df])

    def gradient_u(x: Vec, u: Vec) -> np.ndarray:
        return np.zeros((6, 1))

    def hessian_xx_i(x: Vec, u: Vec, i: int) -> np.ndarray:
        if i >= 4:
            return np.zeros((5, 5))
        if i < 2:
            g, w = x[2] + lfv * x[3], wf
        else:
            g, w = x[2] - lrv * x[3], wr
        curv = 2.0 * g / (1.0 + g * g) ** 2
        H = curv * np.outer(w, w)
        return H if i % 2 == 0 else -H

    def hessian_uu_i(x: Vec, u: Vec, i: int) -> np.ndarray:
        return np.zeros((1, 1))

    def hessian_xu_i(x: Vec, u: Vec, i: int) -> np.ndarray:
        return np.zeros((5, 1))

    return ConstraintSet(
        p=6,
        value=value,
        gradient_x=gradient_x,
        gradient_u=gradient_u,
        hessian_xx_i=hessian_xx_i,
        hessian_uu_i=hessian_uu_i,
        hessian_xu_i=hessian_xu_i,
    )


def lane_change_problem(
    params: LaneChangeParams | None = None,
    s0: float = 3.5,
    terminal_dare_dt: float | None = None,
) -> OcpProblem:
    """Lane-change benchmark: reposition laterally by s0 meters in one horizon.

    The terminal weight is the stationary Riccati solution for the weighted
    dynamics; by default the continuous-time equation is solved, while
    terminal_dare_dt switches to the discrete-time equation of the
    zero-order-hold discretization with that sample time.
    """
    params = params or LaneChangeParams()
    A, B = lane_change_matrices(params)
    Q0 = np.diag(params.q_diag).astype(float)
    R0 = np.array([[params.r_scalar]])
    if terminal_dare_dt is None:
        P = solve_care(A, B, Q0, R0)
    else:
        P = _dare_terminal(A, B, Q0, R0, terminal_dare_dt)
    return OcpProblem(
        A=A,
        B=B,
        x0=np.array([s0, 0.0, 0.0, 0.0, 0.0]),
        T=params.horizon,
        terminal=quadratic_terminal(P),
        incremental=quadratic_cost(Q0, R0),
        constraints=lane_change_constraints(params),
    )


def _dare_terminal(A, B, Q, R, dt: float) -> np.ndarray:
    """Zero-order-hold discretization followed by the discrete Riccati solve."""
    n, m = A.shape[0], B.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A * dt
    M[:n, n:] = B * dt
    E = sla.expm(M)
    Ad, Bd = E[:n, :n], E[:n, n:]
    try:
        return sla.solve_discrete_are(Ad, Bd, Q * dt, R * dt)
    except Exception as exc:
        raise AreSolveFailed(f"discrete Riccati solve failed: {exc}") from exc


def lane_change_outputs(params: LaneChangeParams, X: np.ndarray) -> np.ndarray:
    """Constrained outputs (front slip, rear slip, steering angle) in radians
    for a stacked state array of shape (k, 5)."""
    lfv = params.lf / params.vx
    lrv = params.lr / params.vx
    af = X[:, 4] - np.arctan(X[:, 2] + lfv * X[:, 3])
    ar = -np.arctan(X[:, 2] - lrv * X[:, 3])
    return np.stack([af, ar, X[:, 4]], axis=1)
