import numpy as np
import pytest

import ocsolve as oc
from ocsolve import _kernels
from ocsolve.riccati import _stage_table_cubic, _stage_table_linear


def _python_impl(fn):
    # the numba wrapper keeps the original python function around; without
    # numba the module-level name already is the python function
    return getattr(fn, "py_func", fn)


def test_python_fallbacks_match_jitted_kernels():
    prob = oc.double_integrator_problem(umax=0.5)
    grid = oc.TimeGrid(0.0, prob.T, 50)
    z = oc.initialize(prob, oc.SolverConfig(n_intervals=50, eps_t=1e-8))
    w = oc.assemble_weights(prob, z, oc.NcpKind.FISCHER_BURMEISTER, 1e-2)

    Q_t = _stage_table_linear(w.Q.values)
    S_t = _stage_table_linear(w.S.values)
    q_t = _stage_table_cubic(w.q.values)
    r_t = _stage_table_cubic(w.r.values)
    Rinv_t = np.linalg.inv(_stage_table_linear(w.R.values))
    RB_t = np.ascontiguousarray(Rinv_t @ prob.B.T)
    RSt_t = np.ascontiguousarray(Rinv_t @ np.swapaxes(S_t, 1, 2))
    Rr_t = np.einsum("sab,sb->sa", Rinv_t, r_t)
    yT = np.concatenate([np.eye(2).ravel(), np.zeros(2)])
    args = (np.ascontiguousarray(prob.A), np.ascontiguousarray(prob.B),
            Q_t, S_t, RB_t, RSt_t, q_t, Rr_t, grid.h, yT)
    jitted = _kernels.riccati_backward(*args)
    plain = _python_impl(_kernels.riccati_backward)(*args)
    np.testing.assert_array_equal(jitted, plain)

    Acl_t = np.ascontiguousarray(np.tile(prob.A, (2 * grid.n_nodes - 1, 1, 1)))
    ff_t = np.ascontiguousarray(np.zeros((2 * grid.n_nodes - 1, 2)))
    x0 = np.array([1.0, -0.5])
    a = _kernels.affine_forward(Acl_t, ff_t, grid.h, x0)
    b = _python_impl(_kernels.affine_forward)(Acl_t, ff_t, grid.h, x0)
    np.testing.assert_array_equal(a, b)


def test_stage_tables_node_values_exact():
    v = np.arange(10.0)[:, None]
    for table in (_stage_table_linear(v), _stage_table_cubic(v)):
        np.testing.assert_array_equal(table[0::2], v)


def test_linear_stage_table_midpoints():
    v = np.array([[0.0], [2.0], [6.0]])
    t = _stage_table_linear(v)
    np.testing.assert_allclose(t[1::2], [[1.0], [4.0]])


@pytest.mark.parametrize("n", [8, 16])
def test_cubic_stage_table_order(n):
    # midpoints of a smooth function: interior error O(h^4), boundary O(h^3)
    ts = np.linspace(0.0, 1.0, n + 1)
    v = np.sin(3.0 * ts)[:, None]
    t = _stage_table_cubic(v)
    mids = 0.5 * (ts[:-1] + ts[1:])
    exact = np.sin(3.0 * mids)[:, None]
    err = np.abs(t[1::2] - exact)
    h = 1.0 / n
    assert err[1:-1].max() < 5.0 * h**4
    assert err.max() < 5.0 * h**3


def test_cubic_stage_table_small_grids_fall_back():
    v = np.array([[0.0], [1.0], [4.0]])
    np.testing.assert_array_equal(
        _stage_table_cubic(v), _stage_table_linear(v)
    )


def test_cubic_stage_table_polynomial_exactness():
    ts = np.linspace(0.0, 2.0, 9)
    mids = 0.5 * (ts[:-1] + ts[1:])
    # quadratics are reproduced everywhere (boundary stencil is 3-point)
    v = (ts**2 - 0.5 * ts)[:, None]
    t = _stage_table_cubic(v)
    np.testing.assert_allclose(t[1::2], (mids**2 - 0.5 * mids)[:, None], atol=1e-13)
    # cubics are reproduced at the interior midpoints (4-point stencil)
    v = (ts**3 - 2 * ts**2 + ts)[:, None]
    t = _stage_table_cubic(v)
    exact = (mids**3 - 2 * mids**2 + mids)[:, None]
    np.testing.assert_allclose(t[1::2][1:-1], exact[1:-1], atol=1e-13)
