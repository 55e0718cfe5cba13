import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmverify.backlund import (
    BacklundChain,
    BacklundError,
    OdeFamily,
    TabulatedFunction,
    b_transform,
    build_chain,
    chi_cm,
    closure_check,
    constant_mass_family,
    constant_mass_pivot,
    diagram_families,
    family_distance,
    ode_residual,
    pivot_from_samples,
    probe_indices,
    s_involution_defect,
    s_transform,
    s_transform_anchored,
)
from pdmverify.coordmap import R_closed_form
from pdmverify.grid import SampledFunction, make_grid

CM = make_grid(4.5, 12, 2001)


@pytest.fixture(scope="module")
def pivot():
    return constant_mass_pivot(CM, "minus")


def test_chi_cm_values_and_poles():
    assert chi_cm(3.0) == 0.0
    assert chi_cm(2.0) == pytest.approx(-0.25)
    np.testing.assert_allclose(chi_cm(np.array([0.5, 4.0])), [5.0, 1 / 24])
    for bad in (0.0, 1.0):
        with pytest.raises(BacklundError):
            chi_cm(bad)


def test_tabulated_function():
    f = TabulatedFunction(np.array([3.0, 2.0, 1.0]), np.array([9.0, 4.0, 1.0]), "sq")
    np.testing.assert_array_equal(f(np.array([3.0, 2.0, 1.0])), [9.0, 4.0, 1.0])
    assert f.domain == (1.0, 3.0)
    assert 1.0 < float(f(1.5)) < 4.0
    with pytest.raises(BacklundError):
        f(3.5)
    g = TabulatedFunction(np.array([1.0, 2.0, 1.5]), np.zeros(3))
    with pytest.raises(BacklundError):
        g(1.2)


@pytest.mark.parametrize("branch", ["plus", "minus"])
def test_closed_form_pivot(branch):
    p = constant_mass_pivot(CM, branch)
    R = R_closed_form(SampledFunction(CM, CM.points), branch).values.real
    np.testing.assert_allclose(p.R, R, rtol=1e-12)
    fd = pivot_from_samples(SampledFunction(CM, R))
    assert np.max(np.abs(fd.Rp - p.Rp)[2:-2]) < 1e-4
    assert np.max(np.abs(fd.Rpp - p.Rpp)[2:-2]) < 1e-3
    # exact derivatives satisfy the ODE to roundoff
    assert ode_residual(constant_mass_family(), p).relative < 1e-10


def test_closed_form_pivot_domain():
    with pytest.raises(BacklundError):
        constant_mass_pivot(make_grid(-5, 5, 11))


def test_sampled_pivot_is_second_order():
    errs = []
    for n in (501, 1001, 2001):
        g = make_grid(4.5, 12, n)
        R = R_closed_form(SampledFunction(g, g.points), "minus")
        errs.append(ode_residual(constant_mass_family(), pivot_from_samples(R)).absolute)
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50), st.sampled_from([1.0, -1.0]))
def test_s_is_an_involution_on_phi(q, sign):
    fam = constant_mass_family()
    q = sign * q
    assert float(s_transform(s_transform(fam)).phi(q)) == pytest.approx(float(fam.phi(q)), rel=1e-14)
    assert float(s_transform(fam).phi(q)) == pytest.approx(-q, rel=1e-14)


def test_s_involution_defect_on_probes(pivot):
    probes = pivot.Rp[probe_indices(pivot.s.n)]
    assert s_involution_defect(constant_mass_family(), probes) < 1e-10


def test_probe_indices():
    idx = probe_indices(2001)
    assert len(idx) == 64 and idx[0] == 2 and idx[-1] == 1998


def test_anchored_s_transform_solves_transformed_ode(pivot):
    fam_t, p_t = s_transform_anchored(constant_mass_family(), pivot)
    np.testing.assert_array_equal(p_t.x, pivot.R)
    np.testing.assert_array_equal(p_t.R, pivot.x)
    assert ode_residual(fam_t, p_t).relative < 1e-10


def test_b_transform_stage_one(pivot):
    res = b_transform(constant_mass_family(), pivot, 1.0)
    assert res.lambda_defect < 1e-10
    assert ode_residual(res.family, res.pivot).relative < 1e-4
    np.testing.assert_allclose(res.pivot.R, pivot.x - pivot.x[0])


@pytest.mark.parametrize("lam", [0.5, 2.0, -1.5])
def test_b_transform_lambda_scaling(pivot, lam):
    res = b_transform(constant_mass_family(), pivot, lam)
    np.testing.assert_allclose(res.pivot.R, lam * (pivot.x - pivot.x[0]))
    assert res.lambda_defect < 1e-10


def test_b_transform_converges():
    rels = []
    for n in (1001, 2001, 4001):
        p = constant_mass_pivot(make_grid(4.5, 12, n), "minus")
        r = b_transform(constant_mass_family(), p)
        rels.append(ode_residual(r.family, r.pivot).relative)
    assert rels[0] / rels[2] > 10


def test_b_transform_preconditions(pivot):
    fam = constant_mass_family()
    with pytest.raises(BacklundError):
        b_transform(OdeFamily(fam.chi, fam.phi, theta=lambda x: np.ones_like(x)), pivot)
    # R crosses 3 on the plus branch, where chi vanishes
    with pytest.raises(BacklundError):
        b_transform(fam, constant_mass_pivot(CM, "plus"))
    bent = constant_mass_pivot(CM, "minus")
    object.__setattr__(bent, "R", bent.R * 1.01)
    with pytest.raises(BacklundError):
        b_transform(fam, bent, ode_tol=1e-6)


def test_chain_and_closure_report(pivot):
    chain = build_chain(constant_mass_family(), pivot, (1.0, 1.0, 1.0))
    assert len(chain.stages) == 4
    # exact on the closed-form stage, O(h^2) once derivatives are differenced
    assert chain.lambda_defects[0] < 1e-10
    assert max(chain.lambda_defects) < 1e-4
    json.dumps(chain.to_dict())
    rep = closure_check(chain)
    keys = {"identity_i", "identity_ii", "p2_check", "reconstruct_x", "reconstruct_R", "x_offset", "R_offset", "lambdas"}
    assert keys <= set(rep.details)
    assert rep.absolute == max(rep.details["identity_i"], rep.details["identity_ii"])
    with pytest.raises(BacklundError):
        build_chain(constant_mass_family(), pivot, (1.0,))
    with pytest.raises(BacklundError):
        closure_check(BacklundChain(chain.stages[:2], (1.0,)))


def test_family_distance(pivot):
    fam = constant_mass_family()
    fam_t, _ = s_transform_anchored(fam, pivot)
    assert family_distance(fam_t, fam_t) == 0.0
    far = OdeFamily(TabulatedFunction(np.array([100.0, 101.0]), np.zeros(2)), fam_t.phi)
    assert family_distance(fam_t, far) == float("inf")


def test_diagram_generates_six_labels(pivot):
    rep = diagram_families(constant_mass_family(), pivot)
    assert len(rep.labels) == 6
    assert 1 <= rep.n_distinct <= 6
    assert set(rep.to_dict()) == {"labels", "n_distinct", "closes", "closure_distance"}
