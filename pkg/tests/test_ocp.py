import json

import numpy as np
import pytest

import ocsolve as oc
from ocsolve import (
    ConstraintSet,
    DimensionMismatch,
    GridSignal,
    Iterate,
    NewtonStep,
    OcpProblem,
    TimeGrid,
    affine_constraints,
    apply_step,
    dynamics_defect,
    problem_from_dict,
    quadratic_cost,
    quadratic_terminal,
    zero_iterate,
)
from ocsolve.ocp import dynamics_divergence

from oracles import central_gradient


def make_di(umax=None):
    return oc.double_integrator_problem(umax=umax)


def test_quadratic_cost_derivatives_match_finite_differences():
    rng = np.random.default_rng(0)
    Q = np.array([[2.0, 0.3], [0.3, 1.0]])
    R = np.array([[0.5]])
    S = np.array([[0.1], [-0.2]])
    q = np.array([0.4, -0.7])
    r = np.array([0.2])
    inc = quadratic_cost(Q, R, S, q, r)
    x = rng.standard_normal(2)
    u = rng.standard_normal(1)
    gx = central_gradient(lambda xx: inc.value(xx, u), x)
    gu = central_gradient(lambda uu: inc.value(x, uu), u)
    np.testing.assert_allclose(inc.gradient_x(x, u), gx, atol=1e-7)
    np.testing.assert_allclose(inc.gradient_u(x, u), gu, atol=1e-7)
    np.testing.assert_array_equal(inc.hessian_xx(x, u), Q)
    np.testing.assert_array_equal(inc.hessian_uu(x, u), R)
    np.testing.assert_array_equal(inc.hessian_xu(x, u), S)


def test_quadratic_terminal():
    P = np.diag([1.0, 3.0])
    p = np.array([0.5, 0.0])
    tc = quadratic_terminal(P, p)
    x = np.array([2.0, -1.0])
    assert tc.value(x) == pytest.approx(0.5 * x @ P @ x + p @ x)
    np.testing.assert_allclose(tc.gradient(x), P @ x + p)
    np.testing.assert_array_equal(tc.hessian(x), P)


def test_affine_constraints():
    C = np.array([[1.0, 0.0], [0.0, -1.0]])
    D = np.array([[0.5], [0.0]])
    e = np.array([-1.0, -2.0])
    cs = affine_constraints(C, D, e)
    x = np.array([1.0, 2.0])
    u = np.array([2.0])
    np.testing.assert_allclose(cs.value(x, u), C @ x + D @ u + e)
    np.testing.assert_array_equal(cs.gradient_x(x, u), C)
    np.testing.assert_array_equal(cs.gradient_u(x, u), D)
    assert cs.hessian_xx_i(x, u, 0).shape == (2, 2)
    with pytest.raises(DimensionMismatch):
        affine_constraints(C, np.zeros((3, 1)), e)


def test_problem_validation():
    tc = quadratic_terminal(np.eye(2))
    inc = quadratic_cost(np.eye(2), np.eye(1))
    cs = ConstraintSet.empty(2, 1)
    with pytest.raises(DimensionMismatch):
        OcpProblem(A=np.zeros((2, 3)), B=np.zeros((2, 1)), x0=np.zeros(2), T=1.0,
                   terminal=tc, incremental=inc, constraints=cs)
    with pytest.raises(DimensionMismatch):
        OcpProblem(A=np.zeros((2, 2)), B=np.zeros((3, 1)), x0=np.zeros(2), T=1.0,
                   terminal=tc, incremental=inc, constraints=cs)
    with pytest.raises(ValueError):
        OcpProblem(A=np.zeros((2, 2)), B=np.zeros((2, 1)), x0=np.zeros(2), T=0.0,
                   terminal=tc, incremental=inc, constraints=cs)
    prob = make_di(umax=0.5)
    assert (prob.n, prob.m, prob.p) == (2, 1, 2)


def _iterate_and_step(prob, grid, scale=1.0):
    nn = grid.n_nodes
    z = zero_iterate(prob, grid)
    s = NewtonStep(
        dx=GridSignal(grid, np.full((nn, prob.n), scale)),
        du=GridSignal(grid, np.full((nn, prob.m), scale)),
        lam_plus=GridSignal(grid, np.full((nn, prob.n), scale)),
        dmu=GridSignal(grid, np.full((nn, prob.p), scale)),
    )
    return z, s


def test_apply_step_zero_step_identity():
    prob = make_di()
    grid = TimeGrid(0.0, prob.T, 16)
    z, s = _iterate_and_step(prob, grid, scale=0.0)
    out = apply_step(z, s, 1.0)
    np.testing.assert_array_equal(out.x.values, z.x.values)
    np.testing.assert_array_equal(out.lam.values, z.lam.values)


def test_apply_step_scaling():
    prob = make_di()
    grid = TimeGrid(0.0, prob.T, 16)
    z, s = _iterate_and_step(prob, grid, scale=1.0)
    out = apply_step(z, s, 0.5)
    assert np.all(out.x.values == 0.5)
    assert np.all(out.u.values == 0.5)
    # costate interpolates between old value (0) and lam_plus (1)
    assert np.all(out.lam.values == 0.5)


def test_apply_step_round_trip_is_exact():
    # Dyadic values make the arithmetic exact, so composing a step with its
    # inverse returns the original iterate bitwise.
    prob = make_di()
    grid = TimeGrid(0.0, prob.T, 8)
    nn = grid.n_nodes
    rng = np.random.default_rng(1)
    base = np.round(rng.uniform(-4, 4, (nn, prob.n)) * 8) / 8
    z = Iterate(
        x=GridSignal(grid, base),
        u=GridSignal(grid, base[:, :1]),
        lam=GridSignal(grid, base + 0.25),
        mu=GridSignal(grid, np.zeros((nn, prob.p))),
    )
    dx = np.round(rng.uniform(-2, 2, (nn, prob.n)) * 8) / 8
    s = NewtonStep(
        dx=GridSignal(grid, dx),
        du=GridSignal(grid, dx[:, :1]),
        lam_plus=GridSignal(grid, base - 0.5),
        dmu=GridSignal(grid, np.zeros((nn, prob.p))),
    )
    z1 = apply_step(z, s, 1.0)
    back = NewtonStep(
        dx=GridSignal(grid, -dx),
        du=GridSignal(grid, -dx[:, :1]),
        lam_plus=z.lam,
        dmu=GridSignal(grid, np.zeros((nn, prob.p))),
    )
    z2 = apply_step(z1, back, 1.0)
    np.testing.assert_array_equal(z2.x.values, z.x.values)
    np.testing.assert_array_equal(z2.u.values, z.u.values)
    np.testing.assert_array_equal(z2.lam.values, z.lam.values)


def test_apply_step_validation():
    prob = make_di()
    z, s = _iterate_and_step(prob, TimeGrid(0.0, prob.T, 16))
    with pytest.raises(ValueError):
        apply_step(z, s, 0.0)
    with pytest.raises(ValueError):
        apply_step(z, s, 1.5)
    _, s_other = _iterate_and_step(prob, TimeGrid(0.0, prob.T, 8))
    with pytest.raises(DimensionMismatch):
        apply_step(z, s_other, 1.0)


def test_dynamics_preserved_under_damped_steps():
    # Solver-produced iterates and steps satisfy the dynamics; any damped
    # combination stays feasible at grid tolerance.
    prob = make_di(umax=0.5)
    cfg = oc.SolverConfig(n_intervals=200, eps_t=1e-9, max_iters=3)
    z = oc.initialize(prob, cfg)
    step, _ = oc.newton_update(prob, z, cfg.ncp_kind, cfg.resolved_delta)
    tol = oc.ocp.default_dynamics_tol(prob, z)
    for gamma in (0.25, 0.5, 1.0):
        z_new = apply_step(z, step, gamma)
        assert dynamics_defect(prob, z_new.x, z_new.u) <= tol


def test_dynamics_divergence_discriminates():
    prob = make_di()
    cfg = oc.SolverConfig(n_intervals=200, eps_t=1e-9, max_iters=2)
    z = oc.initialize(prob, cfg)
    assert dynamics_divergence(prob, z.x, z.u) < 1e-3
    garbage_u = GridSignal(z.grid, z.u.values + 1.0)
    assert dynamics_divergence(prob, z.x, garbage_u) > 0.25


def test_problem_json_round_trip(tmp_path):
    data = {
        "A": [[0.0, 1.0], [0.0, 0.0]],
        "B": [[0.0], [1.0]],
        "x0": [1.0, 0.0],
        "T": 5.0,
        "n_intervals": 321,
        "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0]]},
        "terminal": {"P": [[1.0, 0.0], [0.0, 1.0]]},
        "constraints": {
            "C": [[0.0, 0.0], [0.0, 0.0]],
            "D": [[1.0], [-1.0]],
            "e": [-0.5, -0.5],
        },
    }
    path = tmp_path / "prob.json"
    path.write_text(json.dumps(data))
    prob, hint = oc.load_problem(path)
    assert hint == 321
    ref = make_di(umax=0.5)
    np.testing.assert_array_equal(prob.A, ref.A)
    np.testing.assert_array_equal(prob.B, ref.B)
    x = np.array([0.3, -0.2])
    u = np.array([0.9])
    np.testing.assert_allclose(
        prob.constraints.value(x, u), ref.constraints.value(x, u)
    )
    np.testing.assert_allclose(
        prob.incremental.value(x, u), ref.incremental.value(x, u)
    )


def test_problem_dict_missing_key():
    with pytest.raises(ValueError, match="missing"):
        problem_from_dict({"A": [[0.0]]})


def test_problem_dict_unconstrained():
    data = {
        "A": [[0.0]],
        "B": [[1.0]],
        "x0": [1.0],
        "T": 1.0,
        "cost": {"Q": [[1.0]], "R": [[1.0]]},
        "terminal": {"P": [[0.0]]},
    }
    prob, hint = problem_from_dict(data)
    assert hint is None
    assert prob.p == 0
