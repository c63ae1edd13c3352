"""Complementarity reformulation of the inequality conditions.

A scalar NCP function phi vanishes exactly on the complementarity set
{a >= 0, b >= 0, ab = 0}; applied with arguments (mu_i, -c_i) it turns the
sign/complementarity conditions on each constraint into a single nonsmooth
equation.  This module evaluates the two supported NCP functions, selects
elements of their Clarke generalized Jacobians, and forms the (alpha, beta)
coefficients that eliminate the multiplier update from the Newton-step system.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class NcpKind(str, Enum):
    MIN = "min"
    FISCHER_BURMEISTER = "fb"


# Regularization defaults found to work well for each kind.
DEFAULT_DELTA = {NcpKind.MIN: 1e-1, NcpKind.FISCHER_BURMEISTER: 1e-2}

# Tie-break element returned at the kink (mu = -c for min, the origin for FB):
# a valid member of both generalized Jacobians, chosen symmetric so beta stays
# positive at degenerate points.
KINK_ELEMENT = (0.5, -0.5)


@dataclass(frozen=True)
class NcpJacobianElement:
    """One element (eta, gamma_coef) of the generalized Jacobian of phi.

    eta multiplies the multiplier update and gamma_coef multiplies the
    constraint linearization; eta >= 0 and gamma_coef <= 0 always, which is
    what makes the derived beta coefficient nonnegative.  For the FB function
    the element lies on the circle (1-eta)^2 + (1+gamma_coef)^2 = 1.
    """

    eta: float
    gamma_coef: float


def phi(kind: NcpKind, mu_i: float, c_i: float) -> float:
    """Evaluate the NCP function at (mu_i, -c_i)."""
    if kind == NcpKind.MIN:
        return min(mu_i, -c_i)
    return mu_i - c_i - float(np.hypot(mu_i, c_i))


def jacobian_element(kind: NcpKind, mu_i: float, c_i: float) -> NcpJacobianElement:
    """Select a generalized-Jacobian element of phi at (mu_i, -c_i).

    min attains its first argument when mu < -c, giving (1, 0) there and
    (0, -1) on the other branch; this matches the smooth limits of the FB
    element.  At the kink the symmetric tie-break element is returned.
    """
    if kind == NcpKind.MIN:
        if mu_i < -c_i:
            return NcpJacobianElement(1.0, 0.0)
        if mu_i > -c_i:
            return NcpJacobianElement(0.0, -1.0)
        return NcpJacobianElement(*KINK_ELEMENT)
    s = float(np.hypot(mu_i, c_i))
    if s == 0.0:
        return NcpJacobianElement(*KINK_ELEMENT)
    return NcpJacobianElement(1.0 - mu_i / s, -1.0 - c_i / s)


def alpha_beta(phi_val: float, elem: NcpJacobianElement, delta: float) -> tuple[float, float]:
    """Multiplier-elimination coefficients alpha = -phi/(eta + delta),
    beta = -gamma/(eta + delta); delta > 0 guards the division."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    d = elem.eta + delta
    return -phi_val / d, -elem.gamma_coef / d


def phi_values(kind: NcpKind, mu: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized phi over stacked (mu, c) arrays."""
    if kind == NcpKind.MIN:
        return np.minimum(mu, -c)
    return mu - c - np.hypot(mu, c)


def jacobian_values(kind: NcpKind, mu: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Jacobian-element selection; returns (eta, gamma_coef) arrays."""
    if kind == NcpKind.MIN:
        first = mu < -c
        second = mu > -c
        eta = np.where(first, 1.0, np.where(second, 0.0, KINK_ELEMENT[0]))
        gam = np.where(first, 0.0, np.where(second, -1.0, KINK_ELEMENT[1]))
        return eta, gam
    s = np.hypot(mu, c)
    origin = s == 0.0
    safe = np.where(origin, 1.0, s)
    eta = np.where(origin, KINK_ELEMENT[0], 1.0 - mu / safe)
    gam = np.where(origin, KINK_ELEMENT[1], -1.0 - c / safe)
    return eta, gam


def alpha_beta_values(
    phi_v: np.ndarray, eta: np.ndarray, gam: np.ndarray, delta: float
) -> tuple[np.ndarray, np.ndarray]:
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    d = eta + delta
    return -phi_v / d, -gam / d
