import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmverify.grid import (
    INTERIOR_BAND,
    GridError,
    OperatorMatrix,
    SampledFunction,
    cumulative_integral,
    derivative,
    diff_matrix,
    dirichlet_matrix,
    integrate,
    make_grid,
    parity_matrix,
)


def test_small_grid_example():
    g = make_grid(-1, 1, 5)
    np.testing.assert_array_equal(g.points, [-1, -0.5, 0, 0.5, 1])
    assert g.h == 0.5
    assert g.symmetric


@pytest.mark.parametrize("args", [(1, 1, 5), (2, 1, 5), (0, 1, 2), (0, np.inf, 5), (0, 1, 4.5)])
def test_invalid_grids(args):
    with pytest.raises(GridError):
        make_grid(*args)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 50), st.integers(3, 4001))
def test_symmetric_grid_is_exact_mirror(L, n):
    g = make_grid(-L, L, n)
    np.testing.assert_array_equal(g.points, -g.points[::-1])


def test_index_of():
    g = make_grid(-4, 4, 2001)
    assert g.index_of(0.0) == 1000
    with pytest.raises(GridError):
        g.index_of(0.001)


def test_interior_band_is_two():
    assert INTERIOR_BAND == 2


@pytest.mark.parametrize("n", [401, 801, 1601])
def test_derivative_second_order_including_ends(n):
    g = make_grid(-1, 2, n)
    f = SampledFunction(g, np.sin(g.points))
    err1 = np.max(np.abs(derivative(f).values - np.cos(g.points)))
    err2 = np.max(np.abs(derivative(f, 2).values + np.sin(g.points)))
    assert err1 < 2.0 * g.h**2
    assert err2 < 15.0 * g.h**2


def test_diff_matrix_exact_on_quadratics():
    g = make_grid(0, 1, 11)
    x = g.points
    np.testing.assert_allclose((diff_matrix(g, 1) @ (x**2)).real, 2 * x, atol=1e-12)
    np.testing.assert_allclose((diff_matrix(g, 2) @ (x**2)).real, 2.0, atol=1e-9)
    with pytest.raises(GridError):
        diff_matrix(g, 3)


def test_dirichlet_first_derivative_is_skew():
    g = make_grid(-2, 3, 101)
    D = dirichlet_matrix(g, 1).dense
    assert np.max(np.abs(D + D.T)) == 0.0
    D2 = dirichlet_matrix(g, 2).dense
    assert np.max(np.abs(D2 - D2.T)) == 0.0
    assert not D[0].any() and not D[-1].any()


def test_integrate_and_cumulative():
    g = make_grid(-3, 3, 3001)
    f = SampledFunction(g, np.exp(-g.points**2))
    assert integrate(f) == pytest.approx(np.sqrt(np.pi) * 0.9999779095, rel=1e-6)
    c = cumulative_integral(SampledFunction(g, g.points), 0.0)
    np.testing.assert_allclose(c.values, g.points**2 / 2, atol=1e-5)
    # odd integrand on a symmetric grid gives an exactly even integral
    np.testing.assert_array_equal(c.values, c.values[::-1])


def test_parity_matrix():
    g = make_grid(-1, 1, 7)
    P = parity_matrix(g)
    v = np.arange(7.0)
    np.testing.assert_array_equal((P @ v).real, v[::-1])
    with pytest.raises(GridError):
        parity_matrix(make_grid(0, 1, 7))


def test_sampled_function_arithmetic_and_json(tmp_path):
    g = make_grid(-1, 1, 5)
    f = SampledFunction(g, g.points + 1j)
    h = (2 * f - 1) / (f + 3)
    np.testing.assert_allclose(h.values, (2 * (g.points + 1j) - 1) / (g.points + 1j + 3))
    back = SampledFunction.from_json(f.to_json())
    np.testing.assert_array_equal(back.values, f.values)
    assert json.loads(f.to_json())["im"] == [1.0] * 5
    p = tmp_path / "f.csv"
    f.to_csv(p)
    assert p.read_text().splitlines()[0] == "x,re,im"


def test_grid_mismatch_rejected():
    a = SampledFunction(make_grid(0, 1, 5), np.ones(5))
    b = SampledFunction(make_grid(0, 2, 5), np.ones(5))
    with pytest.raises(GridError):
        a + b
    A = OperatorMatrix.diag(a)
    B = OperatorMatrix.diag(b)
    with pytest.raises(GridError):
        A @ B


def test_operator_matrix_algebra():
    g = make_grid(0, 1, 4)
    A = OperatorMatrix(g, np.arange(16.0).reshape(4, 4) * (1 + 1j))
    np.testing.assert_array_equal(A.H.dense, A.dense.conj().T)
    np.testing.assert_array_equal((A @ A).dense, A.dense @ A.dense)
    np.testing.assert_array_equal((2 * A - A).dense, A.dense)
    with pytest.raises(GridError):
        OperatorMatrix(g, np.eye(3))
