import json
import math

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmverify.coordmap import (
    CoordMapError,
    F_from_R,
    R_closed_form,
    R_from_F,
    build_coordinate_map,
    check_f_transform,
    chi_ode,
    invert_xi,
    map_f,
    modified_mass,
    ode_residual_4_18,
    retabulate_on_xi,
    sigma_fn,
    xi_closed_form,
    xi_from_R,
)
from pdmverify.grid import SampledFunction, derivative, make_grid

G2001 = make_grid(-4, 4, 2001)
CM = make_grid(4.5, 12, 4001)


def sf(g, v):
    return SampledFunction(g, np.broadcast_to(np.asarray(v, dtype=float), (g.n,)).copy())


def ones(g):
    return sf(g, 1.0)


def test_R_from_zero_F():
    np.testing.assert_allclose(R_from_F(sf(G2001, 0.0), ones(G2001), 0.5).values, 1.5)


def test_R_from_linear_F():
    x = G2001.points
    R = R_from_F(sf(G2001, x), ones(G2001), 1.0)
    assert np.max(np.abs(R.values - (1 + np.exp(-(x**2))))) < 1e-6


@pytest.mark.parametrize("delta", [0.0])
def test_R_from_F_rejects_unit_R(delta):
    with pytest.raises(CoordMapError):
        R_from_F(sf(G2001, G2001.points), ones(G2001), delta)


def test_R_from_F_rejects_zero_crossing():
    with pytest.raises(CoordMapError):
        R_from_F(sf(G2001, G2001.points), ones(G2001), -1.0)


def test_map_f_linear_F():
    x = G2001.points
    F = sf(G2001, x)
    R = R_from_F(F, ones(G2001), 1.0)
    fm = map_f(F, ones(G2001), R)
    assert np.max(np.abs(fm.f.values - x / (1 + np.exp(-(x**2))))) < 1e-5


def test_map_f_constant_R_forms_disagree():
    # F + U (ln sqrt R)' keeps F, while S F divides by R
    F = sf(G2001, G2001.points)
    fm = map_f(F, ones(G2001), sf(G2001, 2.0))
    np.testing.assert_allclose(fm.f.values, G2001.points / 2)
    np.testing.assert_allclose(fm.f_log.values, G2001.points, atol=1e-12)
    assert fm.gap == pytest.approx(0.5 * G2001.points[-3], rel=1e-12)
    with pytest.raises(CoordMapError):
        map_f(F, ones(G2001), ones(G2001))


def test_xi_examples():
    x = G2001.points
    np.testing.assert_allclose(xi_from_R(sf(G2001, 2.0)).values, x / 2, atol=1e-14)
    R = sf(G2001, 1 + np.exp(-(x**2)))
    xi = xi_from_R(R)
    assert np.all(np.diff(xi.values.real) > 0)
    # centred difference of the trapezoid sum reproduces the averaged integrand
    prod = derivative(xi).values.real * R.values.real
    assert np.max(np.abs(prod - 1)[2:-2]) < 1e-5
    with pytest.raises(CoordMapError):
        xi_from_R(sf(G2001, x))


def test_modified_mass_examples():
    np.testing.assert_allclose(modified_mass(ones(G2001), sf(G2001, 2.0)).values, 0.5)
    g = make_grid(8, 9, 3)
    R = R_closed_form(sigma_fn(ones(g), 1.0, 0.0, x0=8.0, U_fn=lambda t: 1.0) + 8.0, "minus")
    assert R.values[0].real == pytest.approx(7 - 4 * math.sqrt(3), rel=1e-12)
    assert modified_mass(ones(g), R).values[0].real == pytest.approx(13.928203230275509, rel=1e-9)
    with pytest.raises(CoordMapError):
        modified_mass(ones(G2001), sf(G2001, -1.0))


def test_R_closed_form_at_eight():
    g = make_grid(8, 9, 3)
    sigma = sf(g, g.points)
    assert R_closed_form(sigma, "plus").values[0].real == pytest.approx(7 + 4 * math.sqrt(3), abs=1e-12)
    assert R_closed_form(sigma, "minus").values[0].real == pytest.approx(7 - 4 * math.sqrt(3), abs=1e-12)


def test_R_closed_form_domain():
    with pytest.raises(CoordMapError):
        R_closed_form(sf(G2001, G2001.points), "plus")
    with pytest.raises(ValueError):
        R_closed_form(sf(CM, CM.points), "both")


@settings(max_examples=50, deadline=None)
@given(st.floats(4.3, 1e6), st.sampled_from([1.0, -1.0]))
def test_branch_product_is_one(s, sign):
    g = make_grid(0, 1, 3)
    sigma = sf(g, sign * s)
    p = R_closed_form(sigma, "plus", margin=0.0).values.real
    m = R_closed_form(sigma, "minus", margin=0.0).values.real
    np.testing.assert_allclose(p * m, 1.0, rtol=1e-12)
    assert p.item(0) >= 1.0 >= m.item(0) if sign > 0 else p.item(0) <= 1.0 <= m.item(0)


def test_sigma_examples():
    np.testing.assert_allclose(sigma_fn(ones(G2001), 1.0, 0.0).values, G2001.points, atol=1e-13)
    U = sf(G2001, 1 + G2001.points**2)
    s = sigma_fn(U, 1.0, 0.0)
    d = derivative(s).values.real * U.values.real**2
    assert np.max(np.abs(d - 1)[2:-2]) < 1e-3
    np.testing.assert_allclose(sigma_fn(U, 0.0, 2.5).values, 2.5)


def test_sigma_bridges_off_grid_base():
    s = sigma_fn(ones(CM), 1.0, 0.0, x0=0.0, U_fn=lambda t: 1.0)
    np.testing.assert_allclose(s.values.real, CM.points, atol=1e-12)
    with pytest.raises(CoordMapError):
        sigma_fn(ones(CM), 1.0, 0.0, x0=0.0)


@pytest.mark.parametrize("branch", ["plus", "minus"])
def test_constant_mass_ode_residual(branch):
    R = R_closed_form(sf(CM, CM.points), branch)
    assert ode_residual_4_18(R, ones(CM)).absolute < 1e-5


def test_ode_residual_controls():
    assert ode_residual_4_18(sf(CM, 2.0), ones(CM)).absolute == 0.0
    R = sf(G2001, 1 + np.exp(-(G2001.points**2)))
    assert ode_residual_4_18(R, ones(G2001)).absolute > 1e-2


def test_chi_ode_values():
    np.testing.assert_allclose(chi_ode(np.array([3.0, 2.0, -1.0])), [0.0, -0.25, -1.0])


def test_xi_closed_form():
    sigma = sf(CM, CM.points)
    for branch, sign in (("plus", 1.0), ("minus", -1.0)):
        xi = xi_closed_form(sigma, branch)
        R = R_closed_form(sigma, branch).values.real
        # adaptive quadrature of the closed form as the oracle
        inv = lambda t: 1.0 / (t * t / 8 - 1 + sign * (t / 2) * math.sqrt(t * t / 16 - 1))
        for k in (1000, 2500, 4000):
            ref, _ = quad(inv, CM.points[0], CM.points[k], epsabs=1e-13, epsrel=1e-13)
            assert xi.values.real[k] - xi.values.real[0] == pytest.approx(ref, abs=1e-6)
        # the difference quotient adds h^2 (1/R)''/4, largest next to sigma = 4
        prod = derivative(xi).values.real * R
        assert np.max(np.abs(prod - 1)[2:-2]) < 1e-5
    np.testing.assert_allclose(xi_closed_form(sigma, "plus", c=3.0).values - xi_closed_form(sigma, "plus").values, 3.0)
    assert np.all(derivative(xi_closed_form(sigma, "minus")).values.real > 1)


def test_F_reconstruction():
    x = G2001.points
    F = sf(G2001, x)
    back = F_from_R(R_from_F(F, ones(G2001), 1.0), ones(G2001))
    assert np.max(np.abs(back.values - x)[2:-2]) < 1e-3


def test_f_transform_constant_R_is_exact():
    assert check_f_transform(ones(G2001), sf(G2001, 0.0), sf(G2001, 3.0)).absolute < 1e-14


def test_f_transform_non_monotone_xi():
    with pytest.raises(CoordMapError):
        check_f_transform(ones(G2001), sf(G2001, 0.0), sf(G2001, G2001.points))


def test_f_transform_linear_F_matches_analytic_gap():
    # f = x/R while U'(xi)/2 = x exp(-x^2)/R, so the gap is x(1 - exp(-x^2))/R
    g = make_grid(-4, 4, 4001)
    x = g.points
    R = R_from_F(sf(g, x), ones(g), 1.0)
    rep = check_f_transform(ones(g), sf(g, x), R)
    gap = np.max(np.abs(x * (1 - np.exp(-(x**2))) / R.values.real))
    assert rep.absolute == pytest.approx(gap, rel=1e-3)


def test_xi_round_trip_and_retabulation():
    x = G2001.points
    R = sf(G2001, 1 + np.exp(-(x**2)))
    xi = xi_from_R(R)
    probes = np.linspace(xi.values.real[2], xi.values.real[-3], 300)
    back = invert_xi(xi, probes)
    assert np.max(np.abs(np.interp(back, x, xi.values.real) - probes)) < 1e-5
    t = retabulate_on_xi(SampledFunction(G2001, x + 0j), xi)
    assert t.grid.n == G2001.n
    assert np.all(np.diff(t.values.real) > 0)


def test_coordinate_map_bundle(tmp_path):
    x = G2001.points
    R = R_from_F(sf(G2001, x), ones(G2001), 1.0)
    cm = build_coordinate_map(ones(G2001), R, sf(G2001, np.exp(-(x**2))))
    assert np.max(np.abs(cm.R.values * cm.S.values - 1)) < 1e-12
    np.testing.assert_allclose(cm.Z.values.real, np.exp(x**2))
    np.testing.assert_allclose(cm.sigma.values.real, x, atol=1e-13)
    p = tmp_path / "cm.csv"
    cm.to_csv(p)
    assert p.read_text().splitlines()[0] == "x,R,xi,U_modified"
    assert set(json.loads(cm.to_json())) == {"x", "R", "xi", "U_modified", "branch"}
    with pytest.raises(CoordMapError):
        build_coordinate_map(ones(G2001), ones(G2001))
