"""One Newton step of the constrained solver.

The step is computed in four stages: (1) reweight the quadratic cost terms at
every grid node, folding each constraint into the weights through its
complementarity coefficients; (2) integrate the resulting matrix/vector
Riccati pair backward in time; (3) sweep the closed-loop state equation
forward; (4) recover the control, costate, and multiplier updates nodewise.

Both integrations run fixed-step RK4 against half-step coefficient tables.
Midpoint values of the curvature weights Q, R, S are linear interpolants,
which keeps interpolated R positive definite even where active-set switches
kink the weights; midpoint values of the smooth forcing and Riccati signals
(q, r, P, p) use a four-point stencil so that exactly quadratic problems are
resolved to integration precision rather than interpolation precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ncp
from ._kernels import affine_forward, riccati_backward
from .exceptions import IndefiniteR, InfeasibleIterate, NonFiniteState
from .ocp import (
    Iterate,
    NewtonStep,
    OcpProblem,
    dynamics_defect,
    dynamics_divergence,
)
from .odecore import GridSignal

Vec = np.ndarray
Mat = np.ndarray


@dataclass(frozen=True)
class WeightSignals:
    """Reweighted LQR coefficients of the Newton-step subproblem.

    Q, R are symmetric with R(t) positive definite at every node; S is the
    n x m coupling block (its transpose multiplies the state in the
    stationarity condition); alpha and beta are the multiplier-elimination
    coefficients with beta >= 0 elementwise.  cx and cu hold the constraint
    gradients of the generating iterate, needed to recover the multiplier
    update and to evaluate the cached stopping-test residual.
    """

    Q: GridSignal
    R: GridSignal
    S: GridSignal
    q: GridSignal
    r: GridSignal
    alpha: GridSignal
    beta: GridSignal
    cx: GridSignal
    cu: GridSignal


@dataclass(frozen=True)
class RiccatiSolution:
    """Backward-pass solution: matrix signal P(t) and vector signal p(t)."""

    P: GridSignal
    p: GridSignal


def assemble_weights(
    prob: OcpProblem,
    z: Iterate,
    kind: ncp.NcpKind,
    delta: float,
    unconstrained: bool = False,
) -> WeightSignals:
    """Build the reweighted LQR coefficients at every node of z.

    For each constraint the complementarity value, a generalized-Jacobian
    element, and the (alpha, beta) pair are computed; beta scales rank-one
    gradient outer products added to Q, R, S, while (mu + alpha) scales the
    gradient contributions to q and r.  With ``unconstrained=True`` every
    constraint term is dropped (used by the initialization step).

    Raises IndefiniteR if any R(t) fails its Cholesky positive-definiteness
    check, which signals loss of the step subproblem's convexity.
    """
    grid = z.grid
    nn = grid.n_nodes
    n, m, p = prob.n, prob.m, prob.p
    inc = prob.incremental
    cs = prob.constraints
    use_cstr = (p > 0) and not unconstrained

    Qv = np.empty((nn, n, n))
    Rv = np.empty((nn, m, m))
    Sv = np.empty((nn, n, m))
    qv = np.empty((nn, n))
    rv = np.empty((nn, m))
    av = np.zeros((nn, p))
    bv = np.zeros((nn, p))
    cxv = np.zeros((nn, p, n))
    cuv = np.zeros((nn, p, m))

    X, U, MU = z.x.values, z.u.values, z.mu.values
    for i in range(nn):
        x, u, mu = X[i], U[i], MU[i]
        Qi = np.asarray(inc.hessian_xx(x, u), dtype=float)
        Ri = np.asarray(inc.hessian_uu(x, u), dtype=float)
        Si = np.asarray(inc.hessian_xu(x, u), dtype=float)
        qi = np.asarray(inc.gradient_x(x, u), dtype=float)
        ri = np.asarray(inc.gradient_u(x, u), dtype=float)
        if use_cstr:
            cval = np.asarray(cs.value(x, u), dtype=float)
            Cx = np.asarray(cs.gradient_x(x, u), dtype=float)
            Cu = np.asarray(cs.gradient_u(x, u), dtype=float)
            phi_v = ncp.phi_values(kind, mu, cval)
            eta, gam = ncp.jacobian_values(kind, mu, cval)
            alpha, beta = ncp.alpha_beta_values(phi_v, eta, gam, delta)
            Qi = Qi + Cx.T @ (beta[:, None] * Cx)
            Ri = Ri + Cu.T @ (beta[:, None] * Cu)
            Si = Si + Cx.T @ (beta[:, None] * Cu)
            for j in range(p):
                if mu[j] != 0.0:
                    Qi = Qi + mu[j] * cs.hessian_xx_i(x, u, j)
                    Ri = Ri + mu[j] * cs.hessian_uu_i(x, u, j)
                    Si = Si + mu[j] * cs.hessian_xu_i(x, u, j)
            w = mu + alpha
            qi = qi + Cx.T @ w
            ri = ri + Cu.T @ w
            av[i] = alpha
            bv[i] = beta
            cxv[i] = Cx
            cuv[i] = Cu
        Qv[i] = 0.5 * (Qi + Qi.T)
        Rv[i] = 0.5 * (Ri + Ri.T)
        Sv[i] = Si
        qv[i] = qi
        rv[i] = ri
    try:
        np.linalg.cholesky(Rv)
    except np.linalg.LinAlgError:
        bad = _first_indefinite(Rv)
        raise IndefiniteR(
            f"R(t) is not positive definite at node {bad} (t={grid.times()[bad]:.6g})"
        ) from None

    return WeightSignals(
        Q=GridSignal(grid, Qv),
        R=GridSignal(grid, Rv),
        S=GridSignal(grid, Sv),
        q=GridSignal(grid, qv),
        r=GridSignal(grid, rv),
        alpha=GridSignal(grid, av),
        beta=GridSignal(grid, bv),
        cx=GridSignal(grid, cxv),
        cu=GridSignal(grid, cuv),
    )


def _first_indefinite(Rv: np.ndarray) -> int:
    for i in range(Rv.shape[0]):
        try:
            np.linalg.cholesky(Rv[i])
        except np.linalg.LinAlgError:
            return i
    return 0


def _stage_table_linear(values: np.ndarray) -> np.ndarray:
    """Node values plus linearly interpolated midpoints (2N+1 points)."""
    nn = values.shape[0]
    out = np.empty((2 * nn - 1,) + values.shape[1:])
    out[0::2] = values
    out[1::2] = 0.5 * (values[:-1] + values[1:])
    return out


def _stage_table_cubic(values: np.ndarray) -> np.ndarray:
    """Node values plus cubic-stencil midpoints (2N+1 points).

    Interior midpoints use the centered four-point stencil, boundary
    intervals a one-sided three-point stencil; below four nodes this reduces
    to the linear table.  Only used for smooth signals (forcing terms and the
    Riccati pair), where the higher-order midpoints let exactly quadratic
    problems converge to integration precision.
    """
    nn = values.shape[0]
    if nn < 4:
        return _stage_table_linear(values)
    out = np.empty((2 * nn - 1,) + values.shape[1:])
    v = values
    out[0::2] = v
    out[3:-3:2] = (-v[:-3] + 9.0 * v[1:-2] + 9.0 * v[2:-1] - v[3:]) / 16.0
    out[1] = (3.0 * v[0] + 6.0 * v[1] - v[2]) / 8.0
    out[-2] = (3.0 * v[-1] + 6.0 * v[-2] - v[-3]) / 8.0
    return out


def solve_riccati(prob: OcpProblem, w: WeightSignals, xT: Vec) -> RiccatiSolution:
    """Integrate the coupled Riccati pair backward from the terminal node.

    Terminal conditions are the terminal-cost Hessian and gradient evaluated
    at xT; the Hessian is checked symmetric positive semidefinite there.  P
    and p are integrated jointly as one stacked state (so no intermediate
    interpolation of P enters the p equation) and P is re-symmetrized after
    every step.
    """
    grid = w.Q.grid
    n, m = prob.n, prob.m
    A, B = prob.A, prob.B

    PT = np.atleast_2d(np.asarray(prob.terminal.hessian(xT), dtype=float))
    pT = np.asarray(prob.terminal.gradient(xT), dtype=float)
    scale = 1.0 + float(np.abs(PT).max())
    if np.abs(PT - PT.T).max() > 1e-10 * scale:
        raise ValueError("terminal cost Hessian is not symmetric")
    if np.linalg.eigvalsh(PT).min() < -1e-10 * scale:
        raise ValueError("terminal cost Hessian is not positive semidefinite")

    Q_t = _stage_table_linear(w.Q.values)
    S_t = _stage_table_linear(w.S.values)
    q_t = _stage_table_cubic(w.q.values)
    r_t = _stage_table_cubic(w.r.values)
    Rinv_t = np.linalg.inv(_stage_table_linear(w.R.values))

    # Precompute the R^{-1}-applied blocks of the quadratic term.
    RB_t = np.ascontiguousarray(Rinv_t @ B.T)
    RSt_t = np.ascontiguousarray(Rinv_t @ np.swapaxes(S_t, 1, 2))
    Rr_t = np.einsum("sab,sb->sa", Rinv_t, r_t)

    y_terminal = np.concatenate([(0.5 * (PT + PT.T)).ravel(), pT])
    ys = riccati_backward(
        np.ascontiguousarray(A),
        np.ascontiguousarray(B),
        Q_t,
        S_t,
        RB_t,
        RSt_t,
        q_t,
        Rr_t,
        grid.h,
        y_terminal,
    )
    if not np.all(np.isfinite(ys)):
        raise NonFiniteState("backward Riccati integration produced non-finite values")
    return RiccatiSolution(
        P=GridSignal(grid, ys[:, : n * n].reshape(grid.n_nodes, n, n)),
        p=GridSignal(grid, ys[:, n * n :]),
    )


def forward_sweep(
    prob: OcpProblem, w: WeightSignals, ric: RiccatiSolution, x_at_0: Vec
) -> NewtonStep:
    """Integrate the closed-loop state update forward and recover the rest.

    The state update starts from x0 - x_at_0, which vanishes for iterates
    whose trajectory already starts at the problem's initial state.  The
    costate is recovered nodewise from the affine map P*dx + p, the control
    from the stationarity condition, and the multiplier update from the
    eliminated complementarity rows.
    """
    grid = w.Q.grid
    nn = grid.n_nodes
    A, B = prob.A, prob.B

    P_t = _stage_table_cubic(ric.P.values)
    p_t = _stage_table_cubic(ric.p.values)
    S_t = _stage_table_linear(w.S.values)
    r_t = _stage_table_cubic(w.r.values)
    Rinv_t = np.linalg.inv(_stage_table_linear(w.R.values))

    # K = R^{-1}(B'P + S'), feedforward v = R^{-1}(B'p + r), per stage point.
    BtP = np.einsum("mn,snk->smk", B.T, P_t)
    K_t = np.einsum("sab,sbc->sac", Rinv_t, BtP + np.swapaxes(S_t, 1, 2))
    v_t = np.einsum("sab,sb->sa", Rinv_t, p_t @ B + r_t)
    Acl_t = np.ascontiguousarray(A[None, :, :] - np.einsum("nm,smk->snk", B, K_t))
    ff_t = np.ascontiguousarray(-v_t @ B.T)

    dx0 = prob.x0 - np.asarray(x_at_0, dtype=float)
    xs = affine_forward(Acl_t, ff_t, grid.h, dx0)
    if not np.all(np.isfinite(xs)):
        raise NonFiniteState("forward sweep produced non-finite values")

    lam_plus = np.einsum("tij,tj->ti", ric.P.values, xs) + ric.p.values
    rhs_u = w.r.values + lam_plus @ B + np.einsum("tnm,tn->tm", w.S.values, xs)
    du = -np.einsum("tab,tb->ta", Rinv_t[0::2], rhs_u)
    dmu = w.alpha.values.copy()
    if prob.p:
        dmu += w.beta.values * (
            np.einsum("tpn,tn->tp", w.cx.values, xs)
            + np.einsum("tpm,tm->tp", w.cu.values, du)
        )

    return NewtonStep(
        dx=GridSignal(grid, xs),
        du=GridSignal(grid, du),
        lam_plus=GridSignal(grid, lam_plus),
        dmu=GridSignal(grid, dmu.reshape(nn, prob.p)),
    )


# Relative re-simulation divergence above which an iterate is rejected as
# dynamically infeasible.  Feasible iterates re-simulate to a few percent
# even through large transient steps with active-set kinks in the input;
# unrelated (x, u) pairs diverge at the trajectory scale (O(1)).
_FEASIBILITY_LIMIT = 0.25


def newton_update(
    prob: OcpProblem,
    z: Iterate,
    kind: ncp.NcpKind,
    delta: float,
    dynamics_tol: float | None = None,
) -> tuple[NewtonStep, WeightSignals]:
    """Compute one Newton step at z: weights -> backward pass -> forward sweep.

    The forward sweep is only valid on dynamically feasible iterates, so z is
    re-simulated first and InfeasibleIterate raised if its trajectory diverges
    from the dynamics, rather than silently producing a wrong step.  By
    default the relative re-simulation divergence is checked; passing an
    explicit dynamics_tol switches to the per-interval defect with a 100x
    allowance.  Returns the step together with the weights so the caller can
    cache them for the stopping test.
    """
    if dynamics_tol is not None:
        defect = dynamics_defect(prob, z.x, z.u)
        if defect > 100.0 * dynamics_tol:
            raise InfeasibleIterate(
                f"iterate dynamics defect {defect:.3e} exceeds "
                f"100 x tolerance {dynamics_tol:.3e}"
            )
    else:
        div = dynamics_divergence(prob, z.x, z.u)
        if div > _FEASIBILITY_LIMIT:
            raise InfeasibleIterate(
                f"iterate re-simulation diverges by {div:.3e} relative "
                f"(limit {_FEASIBILITY_LIMIT:g}); (x, u) violate the dynamics"
            )
    w = assemble_weights(prob, z, kind, delta)
    ric = solve_riccati(prob, w, xT=z.x.values[-1])
    step = forward_sweep(prob, w, ric, x_at_0=z.x.values[0])
    return step, w
