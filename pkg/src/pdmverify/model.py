"""Scalar model data: mass term, gauge phase, generating functions, potentials.

The mass enters through ``U = 1/sqrt(2 m)``.  The vector potential is real,
``A = a``.  The pseudo-Hermitian side is generated by ``W = F + iG`` and the
weakly pseudo-Hermitian side by ``w = f + ig``.  All derivatives of sampled
data come from :func:`pdmverify.grid.diff_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .exprlang import Expression, eval_array, parse_expr, to_source
from .grid import (
    INTERIOR_BAND,
    Grid,
    GridError,
    SampledFunction,
    cumulative_integral,
    derivative,
    integrate,
)

__all__ = [
    "ModelError",
    "ModelSpec",
    "PotentialPair",
    "sample",
    "sample_U",
    "gauge_phase_alpha",
    "F_from_G",
    "resolve_F",
    "f_from_U",
    "potential_V_plus",
    "potential_V_minus",
    "potentials",
    "potential_identity_defect",
    "residual_eq13",
    "kernel_eigenfunction",
]


class ModelError(ValueError):
    """Generating data violates a model constraint."""


def _expr(value) -> Expression:
    if isinstance(value, str):
        return parse_expr(value)
    if isinstance(value, (int, float)):
        return parse_expr(repr(float(value))) if value >= 0 else parse_expr(f"-{-float(value)!r}")
    return value


@dataclass(frozen=True)
class ModelSpec:
    """Generating data of one scenario.

    ``F_expr`` and ``f_expr`` are optional overrides.  When absent, ``F``
    follows from ``G`` via ``F = (G/2)(U/G)'`` and ``f = U'/2``.
    """

    U_expr: Expression = field(default_factory=lambda: parse_expr("1"))
    a_expr: Expression = field(default_factory=lambda: parse_expr("0"))
    G_expr: Expression = field(default_factory=lambda: parse_expr("0"))
    g_expr: Expression = field(default_factory=lambda: parse_expr("0"))
    epsilon: float = 0.0
    gamma: float = 0.0
    delta: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 0.0
    F_expr: Optional[Expression] = None
    f_expr: Optional[Expression] = None

    @classmethod
    def from_strings(cls, U="1", a="0", G="0", g="0", F=None, f=None, **reals) -> "ModelSpec":
        return cls(
            U_expr=_expr(U),
            a_expr=_expr(a),
            G_expr=_expr(G),
            g_expr=_expr(g),
            F_expr=None if F is None else _expr(F),
            f_expr=None if f is None else _expr(f),
            **{k: float(v) for k, v in reals.items()},
        )

    @classmethod
    def from_mapping(cls, d: Mapping) -> "ModelSpec":
        """Build from a config mapping with keys ``U, a, G, g, F, f`` and reals."""
        known = {"U", "a", "G", "g", "F", "f", "epsilon", "gamma", "delta", "lambda1", "lambda2"}
        extra = set(d) - known
        if extra:
            raise KeyError(f"unknown model key(s): {sorted(extra)}")
        return cls.from_strings(**dict(d))

    def to_mapping(self) -> dict:
        out = {
            "U": to_source(self.U_expr),
            "a": to_source(self.a_expr),
            "G": to_source(self.G_expr),
            "g": to_source(self.g_expr),
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "delta": self.delta,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
        }
        if self.F_expr is not None:
            out["F"] = to_source(self.F_expr)
        if self.f_expr is not None:
            out["f"] = to_source(self.f_expr)
        return out


@dataclass(frozen=True)
class PotentialPair:
    V_plus: SampledFunction
    V_minus: SampledFunction


def sample(e: Expression, g: Grid) -> SampledFunction:
    """Evaluate an expression on every grid point (real samples)."""
    return SampledFunction(g, eval_array(e, g.points))


def sample_U(spec: ModelSpec, g: Grid) -> SampledFunction:
    """Samples of ``U``; rejects any non-positive value."""
    U = sample(spec.U_expr, g)
    bad = np.flatnonzero(U.values <= 0)
    if bad.size:
        raise ModelError(f"U is not positive at x={g.points[bad[0]]:.6g}")
    return U


def gauge_phase_alpha(spec: ModelSpec, g: Grid) -> SampledFunction:
    """Gauge phase ``alpha(x) = -2 * int_0^x a/U``."""
    if not g.symmetric:
        raise GridError("gauge phase is anchored at x=0 and needs a symmetric grid")
    U = sample_U(spec, g)
    a = sample(spec.a_expr, g)
    return -2.0 * cumulative_integral(a / U, 0.0)


def F_from_G(spec: ModelSpec, g: Grid) -> SampledFunction:
    """``F = U'/2 - U G'/(2G)``, equivalent to ``(G/2)(U/G)'``."""
    U = sample_U(spec, g)
    G = sample(spec.G_expr, g)
    zero = np.flatnonzero(np.abs(G.values) < 1e-300)
    if zero.size or np.any(np.sign(G.values[1:]) != np.sign(G.values[:-1])):
        k = zero[0] if zero.size else int(np.flatnonzero(np.sign(G.values[1:]) != np.sign(G.values[:-1]))[0])
        raise ModelError(f"G vanishes near x={g.points[k]:.6g}; F=(G/2)(U/G)' is singular")
    return 0.5 * derivative(U) - U * derivative(G) / (2.0 * G)


def resolve_F(spec: ModelSpec, g: Grid) -> SampledFunction:
    """``F`` from its override if given, otherwise from ``G``."""
    if spec.F_expr is not None:
        return sample(spec.F_expr, g)
    return F_from_G(spec, g)


def f_from_U(spec: ModelSpec, g: Grid) -> SampledFunction:
    """Weak-side generating function ``f = U'/2`` (or its override)."""
    if spec.f_expr is not None:
        return sample(spec.f_expr, g)
    return 0.5 * derivative(sample_U(spec, g))


def potential_V_plus(F: SampledFunction, G: SampledFunction, U: SampledFunction, epsilon: float) -> SampledFunction:
    """``V+ = F^2 - G^2 - (UF)' - 2i U G' + epsilon``."""
    return F * F - G * G - derivative(U * F) - 2j * U * derivative(G) + epsilon


def potential_V_minus(f: SampledFunction, g_fn: SampledFunction, U: SampledFunction, gamma: float) -> SampledFunction:
    """``V- = w^2 - (U w)' + gamma`` with ``w = f + i g``."""
    w = f + 1j * g_fn
    return w * w - derivative(U * w) + gamma


def potentials(spec: ModelSpec, g: Grid) -> PotentialPair:
    U = sample_U(spec, g)
    Vp = potential_V_plus(resolve_F(spec, g), sample(spec.G_expr, g), U, spec.epsilon)
    Vm = potential_V_minus(f_from_U(spec, g), sample(spec.g_expr, g), U, spec.gamma)
    return PotentialPair(Vp, Vm)


def potential_identity_defect(V_plus: SampledFunction, U: SampledFunction, G: SampledFunction) -> float:
    """``max |V+ - conj(V+) + 4i U G'|`` over the interior."""
    r = V_plus.values - np.conj(V_plus.values) + 4j * U.values * derivative(G).values
    b = INTERIOR_BAND
    return float(np.max(np.abs(r[b:-b])))


def residual_eq13(F: SampledFunction, G: SampledFunction, U: SampledFunction) -> float:
    """Max interior residual of the zeroth-order coefficient equation.

    The equation relates ``F^2 - (UF)'`` to a combination of ``F``, ``G``,
    ``U`` and their derivatives divided by ``G'``; it is transcribed term by
    term with numerical derivatives.
    """
    b = INTERIOR_BAND
    d1 = lambda s: derivative(s, 1)
    d2 = lambda s: derivative(s, 2)
    Gp = d1(G)
    if np.any(np.abs(Gp.values[b:-b]) < 1e-12):
        raise ModelError("G' vanishes on the interior")
    if np.any(np.abs(G.values) < 1e-300):
        raise ModelError("G vanishes on the grid")
    UF = U * F
    GU = G / U
    lhs = F * F - d1(UF)
    rhs = (G / Gp) * (-F * d1(F) + 0.5 * d2(UF)) + (1.0 / Gp) * (
        0.25 * d1(U * U * d2(G))
        - 0.25 * G * d1(U * d2(U))
        + 0.25 * d1(U) * U * d2(GU)
        + 0.5 * d1(U) * d1(U) * U * d1(GU)
    ) - 0.25 * d2(U) * U
    r = np.abs((lhs - rhs).values)
    return float(np.max(r[b:-b]))


def kernel_eigenfunction(F: SampledFunction, G: SampledFunction, a: SampledFunction, U: SampledFunction) -> SampledFunction:
    """``exp(-int_0 F/U - i int_0 (G-a)/U)`` normalized to unit L2 norm."""
    g = F.grid
    if not g.symmetric:
        raise GridError("kernel eigenfunction is anchored at x=0 and needs a symmetric grid")
    re = cumulative_integral(F / U, 0.0).values.real
    im = cumulative_integral((G - a) / U, 0.0).values.real
    if np.max(np.abs(re)) > 700:
        raise ModelError("kernel exponent exceeds +-700; shrink the domain")
    psi = np.exp(-re - 1j * im)
    out = SampledFunction(g, psi)
    norm = np.sqrt(integrate(SampledFunction(g, np.abs(psi) ** 2)).real)
    return out / norm
