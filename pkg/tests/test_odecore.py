import math

import numpy as np
import pytest

from ocsolve import GridSignal, NonFiniteState, TimeGrid, integrate, quadrature_l2sq


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0)
    g = TimeGrid(0.0, 2.0, 4)
    assert g.h == 0.5
    assert g.n_nodes == 5
    t = g.times()
    assert np.all(np.diff(t) > 0)
    np.testing.assert_allclose(t, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_signal_node_eval_is_exact():
    g = TimeGrid(0.0, 1.0, 4)
    vals = np.array([[1.0], [2.0], [4.0], [8.0], [16.0]])
    f = GridSignal(g, vals)
    for i, t in enumerate(g.times()):
        assert f.eval(t) is f.values[i] or f.eval(t)[0] == vals[i, 0]


def test_signal_linear_interpolation():
    g = TimeGrid(0.0, 1.0, 2)
    f = GridSignal(g, np.array([[0.0], [1.0], [3.0]]))
    np.testing.assert_allclose(f.eval(0.25), [0.5])
    np.testing.assert_allclose(f.eval(0.75), [2.0])
    with pytest.raises(ValueError):
        f.eval(-0.1)
    with pytest.raises(ValueError):
        f.eval(1.1)


def test_signal_rejects_nonfinite_and_is_frozen():
    g = TimeGrid(0.0, 1.0, 1)
    with pytest.raises(NonFiniteState):
        GridSignal(g, np.array([[np.nan], [0.0]]))
    f = GridSignal(g, np.zeros((2, 1)))
    assert not f.values.flags.writeable


def test_integrate_zero_dynamics():
    g = TimeGrid(0.0, 3.0, 30)
    c = np.array([2.0, -1.0])
    sol = integrate(lambda t, y: np.zeros_like(y), c, g)
    np.testing.assert_array_equal(sol.values, np.tile(c, (31, 1)))


def test_integrate_exponential():
    g = TimeGrid(0.0, 1.0, 100)
    sol = integrate(lambda t, y: y, np.array([1.0]), g)
    assert abs(sol.values[-1, 0] - math.e) < 1e-8


def test_integrate_backward_scalar_riccati():
    # -P' = 1 - P^2 integrated backward from P(2) = 0 gives tanh(2 - t).
    g = TimeGrid(0.0, 2.0, 200)
    sol = integrate(lambda t, y: -1.0 + y * y, np.array([0.0]), g, direction="backward")
    assert abs(sol.values[0, 0] - math.tanh(2.0)) < 1e-8


def test_integrate_is_fourth_order():
    errs = []
    for n in (20, 40):
        g = TimeGrid(0.0, 1.0, n)
        sol = integrate(lambda t, y: y, np.array([1.0]), g)
        errs.append(abs(sol.values[-1, 0] - math.e))
    assert errs[0] / errs[1] >= 12.0


def test_backward_then_forward_roundtrip():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3))
    A = A - 1.5 * np.eye(3)
    g = TimeGrid(0.0, 1.0, 200)
    v = np.array([1.0, -2.0, 0.5])
    back = integrate(lambda t, y: A @ y, v, g, direction="backward")
    fwd = integrate(lambda t, y: A @ y, back.values[0], g)
    assert np.linalg.norm(fwd.values[-1] - v) < 1e-8


def test_integrate_blowup_raises():
    g = TimeGrid(0.0, 1.0, 100)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteState):
            integrate(lambda t, y: y * y, np.array([2.0]), g)


def test_integrate_direction_validation():
    g = TimeGrid(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, np.array([1.0]), g, direction="sideways")


def test_integrate_matrix_state_and_hook():
    g = TimeGrid(0.0, 1.0, 50)
    Y0 = np.eye(2)
    calls = []

    def hook(y):
        calls.append(1)
        return 0.5 * (y + y.T)

    sol = integrate(lambda t, y: np.zeros((2, 2)), Y0, g, step_hook=hook)
    assert sol.values.shape == (51, 2, 2)
    assert len(calls) == 50


def test_quadrature_zero_and_constant():
    g = TimeGrid(0.0, 4.0, 8)
    assert quadrature_l2sq(GridSignal(g, np.zeros((9, 1)))) == 0.0
    assert quadrature_l2sq(GridSignal(g, np.ones((9, 1)))) == pytest.approx(4.0)


def test_quadrature_linear_signal():
    g = TimeGrid(0.0, 1.0, 1000)
    f = GridSignal(g, g.times()[:, None])
    assert abs(quadrature_l2sq(f) - 1.0 / 3.0) < 1e-6


def test_quadrature_bounded_by_sup_norm():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = rng.integers(2, 40)
        d = rng.integers(1, 4)
        T = float(rng.uniform(0.1, 10.0))
        g = TimeGrid(0.0, T, int(n))
        f = GridSignal(g, rng.standard_normal((g.n_nodes, int(d))))
        assert quadrature_l2sq(f) <= T * f.max_node_norm() ** 2 + 1e-12
