"""Outer Newton loop: initialization, iteration, stopping, damping.

Initialization solves the unconstrained subproblem from the zero trajectory,
which lands exactly on the optimum for unconstrained quadratic problems and
gives a dynamically feasible starting iterate otherwise.  Each iteration then
applies one Newton step; by construction every iterate keeps x(0) = x0, the
terminal costate condition, and the dynamics satisfied, so only the tracked
residual norms drive the stopping test.

Full steps are the default.  Optional backtracking damps the step on the
squared cache-free residual as a merit function; since a damped point carries
no valid step cache, its residual is evaluated directly.  A plateau detector
stops the loop once the residual stops improving (the fixed grid puts a floor
on attainable accuracy) instead of spinning to the iteration limit.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    IndefiniteR,
    InfeasibleIterate,
    NonFiniteState,
    OcsolveError,
)
from .kkt import ResidualNorms, residual_direct, residual_norms
from .ncp import DEFAULT_DELTA, NcpKind
from .ocp import Iterate, NewtonStep, OcpProblem, apply_step, zero_iterate
from .odecore import GridSignal, TimeGrid, quadrature_l2sq
from .riccati import assemble_weights, forward_sweep, newton_update, solve_riccati

log = logging.getLogger("ocsolve")

# Plateau rule: stop once the residual has improved by less than 3% for this
# many consecutive iterations while sitting near its running minimum.  The
# flatness threshold is tight enough that the slow multiplier-settling tail on
# state-constrained problems keeps iterating while it still makes progress.
_FLOOR_PATIENCE = 5
_FLOOR_IMPROVEMENT = 0.97
_FLOOR_PROXIMITY = 1.5


@dataclass
class SolverConfig:
    """Knobs of one solve.

    delta defaults per NCP kind (1e-1 for min, 1e-2 for Fischer-Burmeister)
    when left as None; dynamics_tol defaults to a grid-truncation estimate
    scaled by the problem and iterate magnitudes.
    """

    ncp_kind: NcpKind = NcpKind.FISCHER_BURMEISTER
    delta: float | None = None
    eps_t: float = 1e-6
    max_iters: int = 100
    n_intervals: int = 2000
    damping: str = "full_step"  # or "merit_backtracking"
    backtrack_factor: float = 0.5
    min_gamma: float = 1e-3
    dynamics_tol: float | None = None

    def __post_init__(self) -> None:
        self.ncp_kind = NcpKind(self.ncp_kind)
        if self.delta is not None and self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.eps_t <= 0.0:
            raise ValueError("eps_t must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.n_intervals < 2:
            raise ValueError("n_intervals must be at least 2")
        if self.damping not in ("full_step", "merit_backtracking"):
            raise ValueError(f"unknown damping mode {self.damping!r}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0.0 < self.min_gamma <= 1.0:
            raise ValueError("min_gamma must lie in (0, 1]")

    @property
    def resolved_delta(self) -> float:
        return DEFAULT_DELTA[self.ncp_kind] if self.delta is None else self.delta

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "SolverConfig":
        """Read a config from a JSON or TOML file (by extension)."""
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "ncp_kind": self.ncp_kind.value,
            "delta": self.resolved_delta,
            "eps_t": self.eps_t,
            "max_iters": self.max_iters,
            "n_intervals": self.n_intervals,
            "damping": self.damping,
            "backtrack_factor": self.backtrack_factor,
            "min_gamma": self.min_gamma,
            "dynamics_tol": self.dynamics_tol,
        }


@dataclass
class SolverReport:
    """Everything recorded about one solve.

    status is one of "converged", "plateaued" (residual floor reached before
    the tolerance), "max_iters", or "failed"; residual_history always has one
    entry per completed iteration plus the initial one.
    """

    status: str
    iterations: int
    residual_history: list[ResidualNorms]
    step_norm_history: list[float]
    gamma_history: list[float]
    wall_time: float
    final_iterate: Iterate | None
    failure_reason: str | None = None
    floor_value: float | None = None

    @property
    def convergence_ratios(self) -> list[float]:
        totals = [r.total for r in self.residual_history]
        return [b / a if a > 0.0 else float("nan") for a, b in zip(totals, totals[1:])]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "failure_reason": self.failure_reason,
            "floor_value": self.floor_value,
            "residual_history": [
                {"iter": k, **r.to_dict()} for k, r in enumerate(self.residual_history)
            ],
            "step_norm_history": self.step_norm_history,
            "gamma_history": self.gamma_history,
            "convergence_ratios": self.convergence_ratios,
        }


def initialize(prob: OcpProblem, cfg: SolverConfig) -> Iterate:
    """Solve the unconstrained subproblem from the zero trajectory.

    Weights are assembled at the zero trajectory with every constraint term
    dropped, the Riccati pair is integrated backward, and the forward sweep
    starts from x0, so the returned iterate (x, u, lam, 0) satisfies the
    dynamics and x(0) = x0 by construction.  For unconstrained quadratic
    problems this is already the optimum.
    """
    grid = TimeGrid(0.0, prob.T, cfg.n_intervals)
    z0 = zero_iterate(prob, grid)
    w = assemble_weights(prob, z0, cfg.ncp_kind, cfg.resolved_delta, unconstrained=True)
    ric = solve_riccati(prob, w, xT=np.zeros(prob.n))
    step = forward_sweep(prob, w, ric, x_at_0=np.zeros(prob.n))
    return Iterate(
        x=step.dx,
        u=step.du,
        lam=step.lam_plus,
        mu=GridSignal(grid, np.zeros((grid.n_nodes, prob.p))),
    )


def merit(prob: OcpProblem, z: Iterate, kind: NcpKind) -> float:
    """Squared cache-free residual, used to accept or damp Newton steps."""
    return residual_direct(prob, z, kind).total ** 2


def _zero_step(z: Iterate) -> NewtonStep:
    # "No update yet": zero increments with the costate carried over, under
    # which the cached stopping-test formula is evaluable at iteration 0.
    g = z.grid
    return NewtonStep(
        dx=GridSignal(g, np.zeros_like(z.x.values)),
        du=GridSignal(g, np.zeros_like(z.u.values)),
        lam_plus=z.lam,
        dmu=GridSignal(g, np.zeros_like(z.mu.values)),
    )


def _step_norm(z: Iterate, step: NewtonStep) -> float:
    sq = quadrature_l2sq(step.dx) + quadrature_l2sq(step.du)
    sq += quadrature_l2sq(
        GridSignal(step.grid, step.lam_plus.values - z.lam.values)
    )
    sq += quadrature_l2sq(step.dmu)
    return float(np.sqrt(sq))


def _log_r4_crosscheck(prob: OcpProblem, z: Iterate, kind: NcpKind, res: ResidualNorms) -> None:
    if not log.isEnabledFor(logging.INFO):
        return
    direct = residual_direct(prob, z, kind)
    a, b = res.r4_sq, direct.r4_sq
    log.debug("r4_sq cached=%.6e direct=%.6e", a, b)
    if abs(a - b) > max(1e-6, 0.05 * max(a, b)):
        log.warning(
            "cached and direct r4_sq diverge: cached=%.6e direct=%.6e", a, b
        )


def solve(prob: OcpProblem, cfg: SolverConfig) -> SolverReport:
    """Run the full Newton iteration until the residual drops below eps_t,
    the residual floor is reached, or the iteration budget runs out.

    Numerical trouble inside a step (indefinite weights, integration blow-up,
    loss of dynamic feasibility) terminates the solve with status "failed"
    rather than raising.
    """
    t_start = time.perf_counter()
    kind = cfg.ncp_kind
    delta = cfg.resolved_delta

    def elapsed() -> float:
        return time.perf_counter() - t_start

    try:
        z = initialize(prob, cfg)
    except OcsolveError as exc:
        log.error("initialization failed: %s", exc)
        return SolverReport(
            status="failed",
            iterations=0,
            residual_history=[],
            step_norm_history=[],
            gamma_history=[],
            wall_time=elapsed(),
            final_iterate=None,
            failure_reason=f"initialize: {exc}",
        )

    # Iteration-0 entry: the cached residual form with a zero step, i.e. the
    # complementarity-coefficient term alone enters r4.  This is what the
    # stopping-test formula yields before any update exists.
    try:
        w0 = assemble_weights(prob, z, kind, delta)
        history = [residual_norms(prob, z, kind, step=_zero_step(z), weights=w0)]
    except OcsolveError as exc:
        log.error("initial residual evaluation failed: %s", exc)
        return SolverReport(
            status="failed",
            iterations=0,
            residual_history=[],
            step_norm_history=[],
            gamma_history=[],
            wall_time=elapsed(),
            final_iterate=z,
            failure_reason=f"initial residual: {exc}",
        )
    step_norms: list[float] = []
    gammas: list[float] = []
    log.info("iter 0: residual %.6e", history[0].total)

    status = "max_iters"
    failure_reason = None
    floor_value = None
    iterations = 0
    stall_count = 0

    for k in range(1, cfg.max_iters + 1):
        total = history[-1].total
        if not np.isfinite(total):
            status, failure_reason = "failed", "residual is not finite"
            break
        if total < cfg.eps_t:
            status = "converged"
            break
        if stall_count >= _FLOOR_PATIENCE:
            status = "plateaued"
            floor_value = min(r.total for r in history)
            log.info("residual floor detected at %.6e", floor_value)
            break

        try:
            step, weights = newton_update(prob, z, kind, delta, cfg.dynamics_tol)
        except (IndefiniteR, NonFiniteState, InfeasibleIterate) as exc:
            status, failure_reason = "failed", str(exc)
            log.error("iteration %d failed: %s", k, exc)
            break

        gamma = 1.0
        if cfg.damping == "merit_backtracking":
            gamma = _backtrack(prob, z, step, kind, cfg)
        step_norms.append(_step_norm(z, step))
        z = apply_step(z, step, gamma)
        gammas.append(gamma)

        if gamma == 1.0:
            res = residual_norms(prob, z, kind, step=step, weights=weights)
        else:
            # The cached r4 form assumes a full step; damped points are
            # evaluated cache-free.
            res = residual_norms(prob, z, kind)
        _log_r4_crosscheck(prob, z, kind, res)
        history.append(res)
        iterations = k
        log.info(
            "iter %d: residual %.6e (gamma %.3g, step %.3e)",
            k,
            res.total,
            gamma,
            step_norms[-1],
        )

        best = min(r.total for r in history[:-1])
        if (
            res.total > _FLOOR_IMPROVEMENT * history[-2].total
            and res.total < _FLOOR_PROXIMITY * best
        ):
            stall_count += 1
        else:
            stall_count = 0
    else:
        # Budget exhausted; check whether the last iterate already converged.
        if history[-1].total < cfg.eps_t:
            status = "converged"

    if status in ("converged", "plateaued", "max_iters"):
        iterations = len(history) - 1
    return SolverReport(
        status=status,
        iterations=iterations,
        residual_history=history,
        step_norm_history=step_norms,
        gamma_history=gammas,
        wall_time=elapsed(),
        final_iterate=z,
        failure_reason=failure_reason,
        floor_value=floor_value,
    )


def _backtrack(
    prob: OcpProblem, z: Iterate, step: NewtonStep, kind: NcpKind, cfg: SolverConfig
) -> float:
    """Halve gamma until the merit decreases; on exhaustion accept the full
    step with a warning (local convergence is the intended regime)."""
    m0 = merit(prob, z, kind)
    gamma = 1.0
    while gamma >= cfg.min_gamma:
        if merit(prob, apply_step(z, step, gamma), kind) < m0:
            return gamma
        gamma *= cfg.backtrack_factor
    log.warning("backtracking found no merit decrease; taking the full step")
    return 1.0
