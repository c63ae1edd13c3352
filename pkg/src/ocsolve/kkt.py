"""Hamiltonian derivatives and residual norms of the first-order system.

The solver enforces the initial condition, the terminal costate condition,
and the dynamics by construction, so the tracked residual reduces to three
squared L2 norms: the costate equation defect (r4), the control stationarity
defect (r5), and the complementarity defect (r6).

Two evaluators are provided.  The quadrature evaluator expresses r4 through
the Newton-step variables and the reweighted cost terms of the iterate that
generated the step, which is the cheap form used for the stopping test; it
therefore needs the (step, weights) cache from the most recent update.  The
direct evaluator computes r4 from its definition with a finite-difference
costate derivative and needs no cache; it seeds iteration 0 and serves as an
independent cross-check of the cached form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import ncp
from .exceptions import MissingStepCache
from .ocp import Iterate, NewtonStep, OcpProblem
from .odecore import GridSignal, quadrature_l2sq

if TYPE_CHECKING:  # pragma: no cover
    from .riccati import WeightSignals

Vec = np.ndarray


@dataclass(frozen=True)
class ResidualNorms:
    """Squared L2 norms of the tracked residual components."""

    r4_sq: float
    r5_sq: float
    r6_sq: float

    @property
    def total(self) -> float:
        return math.sqrt(self.r4_sq + self.r5_sq + self.r6_sq)

    def to_dict(self) -> dict:
        return {
            "r4_sq": self.r4_sq,
            "r5_sq": self.r5_sq,
            "r6_sq": self.r6_sq,
            "total": self.total,
        }


def hamiltonian_grad_x(prob: OcpProblem, x: Vec, u: Vec, lam: Vec, mu: Vec) -> Vec:
    """grad_x of l(x,u) + lam'(Ax + Bu) + mu'c(x,u) at one node."""
    g = prob.incremental.gradient_x(x, u) + prob.A.T @ lam
    if prob.p:
        g = g + prob.constraints.gradient_x(x, u).T @ mu
    return g


def hamiltonian_grad_u(prob: OcpProblem, x: Vec, u: Vec, lam: Vec, mu: Vec) -> Vec:
    """grad_u of the Hamiltonian at one node."""
    g = prob.incremental.gradient_u(x, u) + prob.B.T @ lam
    if prob.p:
        g = g + prob.constraints.gradient_u(x, u).T @ mu
    return g


def _stationarity_nodes(prob: OcpProblem, z: Iterate) -> np.ndarray:
    X, U, L, M = z.x.values, z.u.values, z.lam.values, z.mu.values
    out = np.empty((z.grid.n_nodes, prob.m))
    for i in range(z.grid.n_nodes):
        out[i] = hamiltonian_grad_u(prob, X[i], U[i], L[i], M[i])
    return out


def _phi_nodes(prob: OcpProblem, z: Iterate, kind: ncp.NcpKind) -> np.ndarray:
    nn = z.grid.n_nodes
    if prob.p == 0:
        return np.zeros((nn, 0))
    X, U, M = z.x.values, z.u.values, z.mu.values
    out = np.empty((nn, prob.p))
    for i in range(nn):
        out[i] = ncp.phi_values(kind, M[i], prob.constraints.value(X[i], U[i]))
    return out


def _lam_dot_fd(lam: GridSignal) -> np.ndarray:
    """Costate derivative on the grid: central differences at interior nodes,
    one-sided second-order differences at the endpoints."""
    L = lam.values
    if L.shape[0] < 3:
        raise ValueError("finite-difference costate derivative needs at least 3 nodes")
    h = lam.grid.h
    dL = np.empty_like(L)
    dL[1:-1] = (L[2:] - L[:-2]) / (2.0 * h)
    dL[0] = (-3.0 * L[0] + 4.0 * L[1] - L[2]) / (2.0 * h)
    dL[-1] = (3.0 * L[-1] - 4.0 * L[-2] + L[-3]) / (2.0 * h)
    return dL


def _r4_direct_sq(prob: OcpProblem, z: Iterate) -> float:
    X, U, L, M = z.x.values, z.u.values, z.lam.values, z.mu.values
    dL = _lam_dot_fd(z.lam)
    vals = np.empty((z.grid.n_nodes, prob.n))
    for i in range(z.grid.n_nodes):
        vals[i] = hamiltonian_grad_x(prob, X[i], U[i], L[i], M[i]) + dL[i]
    return quadrature_l2sq(GridSignal(z.grid, vals))


def _r4_from_cache(step: NewtonStep, weights: "WeightSignals") -> float:
    # Q*dx + S*du + sum_i alpha_i grad_x c_i, everything at the generating iterate.
    vals = np.einsum("tij,tj->ti", weights.Q.values, step.dx.values)
    vals += np.einsum("tim,tm->ti", weights.S.values, step.du.values)
    if weights.alpha.values.shape[1]:
        vals += np.einsum("tpi,tp->ti", weights.cx.values, weights.alpha.values)
    return quadrature_l2sq(GridSignal(step.grid, vals))


def residual_norms(
    prob: OcpProblem,
    z: Iterate,
    kind: ncp.NcpKind,
    step: NewtonStep | None = None,
    weights: "WeightSignals | None" = None,
) -> ResidualNorms:
    """Stopping-test residual at z.

    r5 and r6 are always evaluated at z.  r4 uses the cached (step, weights)
    pair from the update that produced z when given, and falls back to the
    direct finite-difference evaluation when no cache exists (iteration 0).
    """
    if (step is None) != (weights is None):
        raise MissingStepCache("step and weights must be cached together")
    r5_sq = quadrature_l2sq(GridSignal(z.grid, _stationarity_nodes(prob, z)))
    r6_sq = quadrature_l2sq(GridSignal(z.grid, _phi_nodes(prob, z, kind)))
    if step is None:
        r4_sq = _r4_direct_sq(prob, z)
    else:
        r4_sq = _r4_from_cache(step, weights)
    return ResidualNorms(r4_sq=r4_sq, r5_sq=r5_sq, r6_sq=r6_sq)


def residual_direct(prob: OcpProblem, z: Iterate, kind: ncp.NcpKind) -> ResidualNorms:
    """Cache-free residual: r4 from its definition with finite-difference
    costate derivative, r5 and r6 as in residual_norms."""
    return ResidualNorms(
        r4_sq=_r4_direct_sq(prob, z),
        r5_sq=quadrature_l2sq(GridSignal(z.grid, _stationarity_nodes(prob, z))),
        r6_sq=quadrature_l2sq(GridSignal(z.grid, _phi_nodes(prob, z, kind))),
    )
