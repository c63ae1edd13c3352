"""Indirect solver for constrained continuous-time linear-quadratic optimal
control: the first-order optimality system is reformulated with a
complementarity function and solved by a semismooth Newton method whose steps
are computed by one backward Riccati pass and one forward closed-loop sweep
per iteration."""

from .care import solve_care
from .exceptions import (
    AreSolveFailed,
    DimensionMismatch,
    IndefiniteR,
    InfeasibleIterate,
    MissingStepCache,
    NonFiniteState,
    OcsolveError,
)
from .kkt import (
    ResidualNorms,
    hamiltonian_grad_x,
    hamiltonian_grad_u,
    residual_direct,
    residual_norms,
)
from .ncp import NcpJacobianElement, NcpKind, alpha_beta, jacobian_element, phi
from .ocp import (
    ConstraintSet,
    IncrementalCost,
    Iterate,
    NewtonStep,
    OcpProblem,
    TerminalCost,
    affine_constraints,
    apply_step,
    dynamics_defect,
    dynamics_divergence,
    load_problem,
    problem_from_dict,
    quadratic_cost,
    quadratic_terminal,
    zero_iterate,
)
from .odecore import GridSignal, TimeGrid, integrate, quadrature_l2sq
from .problems import (
    LaneChangeParams,
    double_integrator_problem,
    lane_change_problem,
    scalar_lqr_problem,
)
from .riccati import (
    RiccatiSolution,
    WeightSignals,
    assemble_weights,
    forward_sweep,
    newton_update,
    solve_riccati,
)
from .solver import SolverConfig, SolverReport, initialize, merit, solve

__version__ = "0.1.0"

__all__ = [
    "AreSolveFailed",
    "ConstraintSet",
    "DimensionMismatch",
    "GridSignal",
    "IncrementalCost",
    "IndefiniteR",
    "InfeasibleIterate",
    "Iterate",
    "LaneChangeParams",
    "MissingStepCache",
    "NcpJacobianElement",
    "NcpKind",
    "NewtonStep",
    "NonFiniteState",
    "OcpProblem",
    "OcsolveError",
    "ResidualNorms",
    "RiccatiSolution",
    "SolverConfig",
    "SolverReport",
    "TerminalCost",
    "TimeGrid",
    "WeightSignals",
    "affine_constraints",
    "alpha_beta",
    "apply_step",
    "assemble_weights",
    "double_integrator_problem",
    "dynamics_defect",
    "dynamics_divergence",
    "forward_sweep",
    "hamiltonian_grad_u",
    "hamiltonian_grad_x",
    "initialize",
    "integrate",
    "jacobian_element",
    "lane_change_problem",
    "load_problem",
    "merit",
    "newton_update",
    "phi",
    "problem_from_dict",
    "quadratic_cost",
    "quadratic_terminal",
    "quadrature_l2sq",
    "residual_direct",
    "residual_norms",
    "scalar_lqr_problem",
    "solve",
    "solve_care",
    "solve_riccati",
    "zero_iterate",
]
