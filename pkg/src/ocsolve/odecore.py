"""Fixed-step numerical kernels shared by the solver.

Everything lives on one uniform time grid: signals are stored nodewise and
evaluated by linear interpolation, initial value problems are integrated with
classical 4th-order Runge-Kutta (forward or backward in time), and squared L2
norms are computed by composite trapezoidal quadrature.  Keeping a single
fixed grid makes signal arithmetic exact and runs reproducible; grid density
is the accuracy knob.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import NonFiniteState

RhsFn = Callable[[float, np.ndarray], np.ndarray]

# Relative slack when deciding whether an evaluation time coincides with a node.
_NODE_SNAP = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with nodes t_start + i*h, h = (t_end - t_start)/n_intervals."""

    t_start: float
    t_end: float
    n_intervals: int

    def __post_init__(self) -> None:
        if not self.t_end > self.t_start:
            raise ValueError(
                f"t_end ({self.t_end}) must be greater than t_start ({self.t_start})"
            )
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 1:
            raise ValueError(f"n_intervals must be a positive integer, got {self.n_intervals}")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.n_intervals

    @property
    def n_nodes(self) -> int:
        return self.n_intervals + 1

    def times(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.n_nodes)


@dataclass(frozen=True)
class GridSignal:
    """A vector- or matrix-valued function of time sampled on a uniform grid.

    ``values[i]`` is the value at node i (the leading axis indexes nodes, any
    trailing shape is allowed).  Evaluation at a node returns the stored value
    exactly; evaluation between nodes returns the linear interpolant.  The
    value array is frozen after construction so signals can be shared freely.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"values has leading dimension {v.shape[0]}, grid has {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteState("grid signal contains non-finite values")
        if v is self.values:
            v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def value_shape(self) -> tuple:
        return self.values.shape[1:]

    def eval(self, t: float) -> np.ndarray:
        g = self.grid
        k = (t - g.t_start) / g.h
        i = int(round(k))
        if 0 <= i <= g.n_intervals and abs(k - i) <= _NODE_SNAP * max(1.0, abs(k)):
            return self.values[i]
        if k < 0.0 or k > g.n_intervals:
            raise ValueError(f"t={t} lies outside the grid span [{g.t_start}, {g.t_end}]")
        lo = int(np.floor(k))
        theta = k - lo
        return (1.0 - theta) * self.values[lo] + theta * self.values[lo + 1]

    def max_node_norm(self) -> float:
        flat = self.values.reshape(self.grid.n_nodes, -1)
        if flat.shape[1] == 0:
            return 0.0
        return float(np.linalg.norm(flat, axis=1).max())


def integrate(
    rhs: RhsFn,
    y_init: np.ndarray,
    grid: TimeGrid,
    direction: str = "forward",
    step_hook: Callable[[np.ndarray], np.ndarray] | None = None,
) -> GridSignal:
    """Integrate dy/dt = rhs(t, y) across the grid with classical RK4.

    ``direction="forward"`` starts from y_init at t_start; ``"backward"``
    starts from y_init at t_end and steps with -h.  Either way the result is a
    normal time-indexed signal holding the solution at every node.
    ``step_hook``, when given, maps the state after each completed step (used
    to re-symmetrize matrix-valued states).

    Raises NonFiniteState as soon as a step produces a non-finite value, which
    signals blow-up of the underlying equation or a defective problem.
    """
    y = np.asarray(y_init, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial value is not finite")
    n = grid.n_intervals
    h = grid.h
    ts = grid.times()
    out = np.empty((n + 1,) + y.shape)

    if direction == "forward":
        node_order = range(n)
        sgn = 1.0
        out[0] = y
    elif direction == "backward":
        node_order = range(n, 0, -1)
        sgn = -1.0
        out[n] = y
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")

    hh = sgn * h
    for i in node_order:
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * hh, y + (0.5 * hh) * k1)
        k3 = rhs(t + 0.5 * hh, y + (0.5 * hh) * k2)
        k4 = rhs(t + hh, y + hh * k3)
        y = y + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step_hook is not None:
            y = step_hook(y)
        j = i + 1 if direction == "forward" else i - 1
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"integration produced a non-finite state near t={ts[j]:.6g}")
        out[j] = y
    return GridSignal(grid, out)


def quadrature_l2sq(f: GridSignal) -> float:
    """Trapezoidal approximation of the integral of ||f(t)||^2 over the span.

    Matrix-valued signals are measured in the Frobenius norm.
    """
    flat = f.values.reshape(f.grid.n_nodes, -1)
    sq = np.einsum("ij,ij->i", flat, flat)
    return float(f.grid.h * (sq.sum() - 0.5 * (sq[0] + sq[-1])))
