"""Shared builders for the test modules."""

from pdmverify.coordmap import R_from_F, map_f
from pdmverify.grid import make_grid
from pdmverify.model import f_from_U, potentials, resolve_F, sample, sample_U
from pdmverify.operators import build_eta_minus, build_eta_plus, build_modified_H, build_zeta
from pdmverify.scenarios import scenario


def intertwining_pair(name, n, side="plus", L=4.0, form="factored"):
    """``(eta, H)`` for a scenario on ``[-L, L]``."""
    spec = scenario(name)
    g = make_grid(-L, L, n)
    U = sample_U(spec, g)
    a = sample(spec.a_expr, g)
    pot = potentials(spec, g)
    if side == "plus":
        eta = build_eta_plus(U, resolve_F(spec, g), sample(spec.G_expr, g), a)
        H = build_modified_H(U, a, pot.V_plus, form)
    else:
        eta, _ = build_eta_minus(U, f_from_U(spec, g), sample(spec.g_expr, g), a)
        H = build_modified_H(U, a, pot.V_minus, form)
    return eta, H


def pipeline(n, delta=1.0, L=4.0):
    """Operators of the U = 1, g = G = exp(x) pipeline.

    Returns ``(U, R, eta_plus, eta_minus, eta_minus_dag, zeta, gap)``.
    """
    spec = scenario("M1", delta=delta)
    g = make_grid(-L, L, n)
    U = sample_U(spec, g)
    a = sample(spec.a_expr, g)
    G = sample(spec.G_expr, g)
    F = resolve_F(spec, g)
    R = R_from_F(F, U, delta)
    fm = map_f(F, U, R)
    em, emd = build_eta_minus(U, fm.f, G, a, check_f=False)
    Z, _ = build_zeta(U, F, G, a)
    ep = build_eta_plus(U, F, G, a)
    return U, R, ep, em, emd, Z, fm.gap
