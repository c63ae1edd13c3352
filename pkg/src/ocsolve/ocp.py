"""Problem definition and iterate representation.

An OcpProblem bundles the linear dynamics (A, B, x0, horizon) with callback
packs for the terminal cost, the incremental cost, and the inequality
constraints, each carrying first and second derivatives.  Convenience
constructors cover the linear-quadratic case (quadratic costs, affine
constraints) so no hand-written derivatives are needed there; general
twice-differentiable convex callbacks are accepted for everything else.

The solver state is an Iterate z = (x, u, lam, mu) of grid signals sharing
one time grid.  The multiplier signal mu is kept even for unconstrained
problems (zero-length values) so both cases run the same code path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ._kernels import affine_forward
from .exceptions import DimensionMismatch
from .odecore import GridSignal, TimeGrid

Vec = np.ndarray
Mat = np.ndarray


@dataclass(frozen=True)
class TerminalCost:
    """Terminal cost with gradient and (symmetric PSD) Hessian callbacks."""

    value: Callable[[Vec], float]
    gradient: Callable[[Vec], Vec]
    hessian: Callable[[Vec], Mat]


@dataclass(frozen=True)
class IncrementalCost:
    """Running cost with all first and second derivative callbacks.

    hessian_xx is n x n, hessian_uu is m x m, and hessian_xu is n x m with
    entry (i, j) the mixed derivative in x_i and u_j; the stacked Hessian
    [[xx, xu], [xu^T, uu]] must be symmetric.
    """

    value: Callable[[Vec, Vec], float]
    gradient_x: Callable[[Vec, Vec], Vec]
    gradient_u: Callable[[Vec, Vec], Vec]
    hessian_xx: Callable[[Vec, Vec], Mat]
    hessian_uu: Callable[[Vec, Vec], Mat]
    hessian_xu: Callable[[Vec, Vec], Mat]


@dataclass(frozen=True)
class ConstraintSet:
    """p inequality constraints c(x, u) <= 0.

    value returns the p-vector c; gradient_x is p x n with row i holding
    grad_x c_i (gradient_u analogously p x m).  The per-component Hessians are
    indexed callables so affine constraints can simply return zeros.
    """

    p: int
    value: Callable[[Vec, Vec], Vec]
    gradient_x: Callable[[Vec, Vec], Mat]
    gradient_u: Callable[[Vec, Vec], Mat]
    hessian_xx_i: Callable[[Vec, Vec, int], Mat]
    hessian_uu_i: Callable[[Vec, Vec, int], Mat]
    hessian_xu_i: Callable[[Vec, Vec, int], Mat]

    @staticmethod
    def empty(n: int, m: int) -> "ConstraintSet":
        return ConstraintSet(
            p=0,
            value=lambda x, u: np.zeros(0),
            gradient_x=lambda x, u: np.zeros((0, n)),
            gradient_u=lambda x, u: np.zeros((0, m)),
            hessian_xx_i=lambda x, u, i: np.zeros((n, n)),
            hessian_uu_i=lambda x, u, i: np.zeros((m, m)),
            hessian_xu_i=lambda x, u, i: np.zeros((n, m)),
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class OcpProblem:
    """Finite-horizon constrained linear-quadratic optimal control problem.

    Immutable after construction; callbacks must be reentrant.  Constraint
    qualification (linear independence of active constraint gradients and
    controllability of the constrained dynamics) is the caller's
    responsibility and is not checkable from the data held here.
    """

    A: Mat
    B: Mat
    x0: Vec
    T: float
    terminal: TerminalCost
    incremental: IncrementalCost
    constraints: ConstraintSet

    def __post_init__(self) -> None:
        A = _readonly(self.A)
        B = _readonly(self.B)
        x0 = _readonly(self.x0)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionMismatch(f"B must be {n} x m, got shape {B.shape}")
        if x0.shape != (n,):
            raise DimensionMismatch(f"x0 must have length {n}, got shape {x0.shape}")
        if not self.T > 0.0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.constraints.p


def quadratic_terminal(P: Mat, p: Vec | None = None) -> TerminalCost:
    """Terminal cost 0.5 x'Px + p'x."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    pv = np.zeros(n) if p is None else np.asarray(p, dtype=float)
    return TerminalCost(
        value=lambda x: float(0.5 * x @ P @ x + pv @ x),
        gradient=lambda x: P @ x + pv,
        hessian=lambda x: P,
    )


def quadratic_cost(
    Q: Mat,
    R: Mat,
    S: Mat | None = None,
    q: Vec | None = None,
    r: Vec | None = None,
) -> IncrementalCost:
    """Running cost 0.5 x'Qx + 0.5 u'Ru + x'Su + q'x + r'u."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = Q.shape[0], R.shape[0]
    S = np.zeros((n, m)) if S is None else np.asarray(S, dtype=float)
    q = np.zeros(n) if q is None else np.asarray(q, dtype=float)
    r = np.zeros(m) if r is None else np.asarray(r, dtype=float)
    return IncrementalCost(
        value=lambda x, u: float(0.5 * x @ Q @ x + 0.5 * u @ R @ u + x @ S @ u + q @ x + r @ u),
        gradient_x=lambda x, u: Q @ x + S @ u + q,
        gradient_u=lambda x, u: R @ u + S.T @ x + r,
        hessian_xx=lambda x, u: Q,
        hessian_uu=lambda x, u: R,
        hessian_xu=lambda x, u: S,
    )


def affine_constraints(C: Mat, D: Mat, e: Vec) -> ConstraintSet:
    """Constraints Cx + Du + e <= 0 (componentwise)."""
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    e = np.asarray(e, dtype=float)
    p, n = C.shape
    m = D.shape[1]
    if D.shape != (p, m) or e.shape != (p,):
        raise DimensionMismatch(
            f"inconsistent constraint shapes: C {C.shape}, D {D.shape}, e {e.shape}"
        )
    return ConstraintSet(
        p=p,
        value=lambda x, u: C @ x + D @ u + e,
        gradient_x=lambda x, u: C,
        gradient_u=lambda x, u: D,
        hessian_xx_i=lambda x, u, i: np.zeros((n, n)),
        hessian_uu_i=lambda x, u, i: np.zeros((m, m)),
        hessian_xu_i=lambda x, u, i: np.zeros((n, m)),
    )


@dataclass(frozen=True)
class Iterate:
    """Solver state z = (x, u, lam, mu) on one shared grid."""

    x: GridSignal
    u: GridSignal
    lam: GridSignal
    mu: GridSignal

    def __post_init__(self) -> None:
        g = self.x.grid
        for name in ("u", "lam", "mu"):
            if getattr(self, name).grid != g:
                raise DimensionMismatch(f"signal {name} does not share the iterate grid")

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


@dataclass(frozen=True)
class NewtonStep:
    """Newton update (dx, du, lam_plus, dmu) on the generating iterate's grid.

    lam_plus stores the updated costate itself rather than its increment, so a
    damped update interpolates between the old and new costate.
    """

    dx: GridSignal
    du: GridSignal
    lam_plus: GridSignal
    dmu: GridSignal

    def __post_init__(self) -> None:
        g = self.dx.grid
        for name in ("du", "lam_plus", "dmu"):
            if getattr(self, name).grid != g:
                raise DimensionMismatch(f"signal {name} does not share the step grid")

    @property
    def grid(self) -> TimeGrid:
        return self.dx.grid


def zero_iterate(prob: OcpProblem, grid: TimeGrid) -> Iterate:
    nn = grid.n_nodes
    return Iterate(
        x=GridSignal(grid, np.zeros((nn, prob.n))),
        u=GridSignal(grid, np.zeros((nn, prob.m))),
        lam=GridSignal(grid, np.zeros((nn, prob.n))),
        mu=GridSignal(grid, np.zeros((nn, prob.p))),
    )


def apply_step(z: Iterate, s: NewtonStep, gamma: float) -> Iterate:
    """Nodewise damped update: x + gamma*dx, u + gamma*du, mu + gamma*dmu and
    lam + gamma*(lam_plus - lam).  gamma = 1 recovers the full Newton update."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    g = z.grid
    if s.grid != g:
        raise DimensionMismatch("step grid differs from iterate grid")
    for a, b in ((z.x, s.dx), (z.u, s.du), (z.lam, s.lam_plus), (z.mu, s.dmu)):
        if a.value_shape != b.value_shape:
            raise DimensionMismatch(
                f"step value shape {b.value_shape} does not match iterate shape {a.value_shape}"
            )
    return Iterate(
        x=GridSignal(g, z.x.values + gamma * s.dx.values),
        u=GridSignal(g, z.u.values + gamma * s.du.values),
        lam=GridSignal(g, z.lam.values + gamma * (s.lam_plus.values - z.lam.values)),
        mu=GridSignal(g, z.mu.values + gamma * s.dmu.values),
    )


def dynamics_defect(prob: OcpProblem, x: GridSignal, u: GridSignal) -> float:
    """Largest per-interval defect of x against one RK4 step of the dynamics
    driven by the linearly interpolated input, normalized by h (units of xdot).

    The defect is linear in (x, u), so feasibility bounds are preserved under
    damped step combinations.
    """
    g = x.grid
    h = g.h
    X = x.values
    U = u.values.reshape(g.n_nodes, -1)
    At = prob.A.T
    Bt = prob.B.T
    X0 = X[:-1]
    U0, U1 = U[:-1], U[1:]
    Um = 0.5 * (U0 + U1)
    k1 = X0 @ At + U0 @ Bt
    k2 = (X0 + (0.5 * h) * k1) @ At + Um @ Bt
    k3 = (X0 + (0.5 * h) * k2) @ At + Um @ Bt
    k4 = (X0 + h * k3) @ At + U1 @ Bt
    X1 = X0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return float(np.linalg.norm(X1 - X[1:], axis=1).max() / h)


def default_dynamics_tol(prob: OcpProblem, z: Iterate) -> float:
    """Grid-truncation estimate for the dynamics defect of a valid iterate.

    Stage inputs are linearly interpolated, so the defect of an exactly
    feasible trajectory floors at O(h^2); the estimate scales that with the
    problem and iterate magnitudes.
    """
    h = z.grid.h
    coeff_scale = 1.0 + float(np.linalg.norm(prob.A) + np.linalg.norm(prob.B))
    state_scale = 1.0 + z.x.max_node_norm() + z.u.max_node_norm()
    return 10.0 * h * h * coeff_scale * state_scale


def dynamics_divergence(prob: OcpProblem, x: GridSignal, u: GridSignal) -> float:
    """Relative divergence between x and its re-simulation from x(0) under u.

    Re-integrates the dynamics across the whole span (RK4 with linearly
    interpolated input) and returns max-node ||x - resim|| / (1 + max||x||).
    Kinks in u contribute only localized re-simulation error, so values stay
    small for any trajectory consistent with the dynamics, while trajectories
    unrelated to u score O(1).
    """
    g = x.grid
    n_stage = 2 * g.n_nodes - 1
    forcing = u.values.reshape(g.n_nodes, -1) @ prob.B.T
    ff_t = np.empty((n_stage, prob.n))
    ff_t[0::2] = forcing
    ff_t[1::2] = 0.5 * (forcing[:-1] + forcing[1:])
    A_t = np.ascontiguousarray(np.broadcast_to(prob.A, (n_stage,) + prob.A.shape))
    resim = affine_forward(A_t, ff_t, g.h, x.values[0].copy())
    err = float(np.linalg.norm(resim - x.values, axis=1).max())
    return err / (1.0 + x.max_node_norm())


# ---------------------------------------------------------------------------
# JSON interchange for linear-quadratic problems with affine constraints.
#
# Schema (all matrices row-major nested lists):
#   {
#     "A": [[...]], "B": [[...]], "x0": [...], "T": 4.0,
#     "n_intervals": 2000,                      # optional grid hint
#     "cost": {"Q": [[...]], "R": [[...]],
#              "S": [[...]], "q": [...], "r": [...]},   # S, q, r optional
#     "terminal": {"P": [[...]], "p": [...]},           # p optional
#     "constraints": {"C": [[...]], "D": [[...]], "e": [...]}   # optional
#   }
# ---------------------------------------------------------------------------


def problem_from_dict(data: dict) -> tuple[OcpProblem, int | None]:
    """Build an LQ problem from its JSON dictionary; returns (problem, grid hint)."""
    try:
        A = np.asarray(data["A"], dtype=float)
        B = np.asarray(data["B"], dtype=float)
        x0 = np.asarray(data["x0"], dtype=float)
        T = float(data["T"])
        cost = data["cost"]
        term = data["terminal"]
    except KeyError as exc:
        raise ValueError(f"problem file is missing required key {exc}") from exc
    inc = quadratic_cost(
        np.asarray(cost["Q"], dtype=float),
        np.asarray(cost["R"], dtype=float),
        None if "S" not in cost else np.asarray(cost["S"], dtype=float),
        None if "q" not in cost else np.asarray(cost["q"], dtype=float),
        None if "r" not in cost else np.asarray(cost["r"], dtype=float),
    )
    tc = quadratic_terminal(
        np.asarray(term["P"], dtype=float),
        None if "p" not in term else np.asarray(term["p"], dtype=float),
    )
    if "constraints" in data and data["constraints"] is not None:
        cd = data["constraints"]
        cs = affine_constraints(
            np.asarray(cd["C"], dtype=float),
            np.asarray(cd["D"], dtype=float),
            np.asarray(cd["e"], dtype=float),
        )
    else:
        cs = ConstraintSet.empty(A.shape[0], B.shape[1])
    n_intervals = data.get("n_intervals")
    prob = OcpProblem(A=A, B=B, x0=x0, T=T, terminal=tc, incremental=inc, constraints=cs)
    return prob, None if n_intervals is None else int(n_intervals)


def load_problem(path: str | Path) -> tuple[OcpProblem, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))
