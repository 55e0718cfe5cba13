"""Ŝ and B̂ transformations of second-order ODE families, pivot-anchored.

A family ``{chi, phi, theta}`` denotes the equation

    Y'' + theta(X) Y' = chi(Y) phi(Y'),     ' = d/dX.

Transformations are evaluated along a concrete solution (the *pivot*),
parametrized by a fixed uniform grid ``s``.  The pivot carries ``X(s)``,
``Y(s)``, ``P = dY/dX`` and ``P' = dP/dX``.

``s_transform`` swaps the roles of ``X`` and ``Y``::

    X~ = Y,  Y~ = X,  P~ = 1/P,  P~' = -P'/P^3,
    chi~ = chi (re-read along the pivot),  phi#(q) = -q^3 phi(1/q).

``b_transform`` with constant ``lam`` (``theta = 0`` only)::

    X_new = int dP/phi(P)     (cumulative Simpson along s, base at the left end)
    Y_new = lam (X - X[0])
    P_new = lam phi(P) / P'   (equal to lam/chi(Y) on a solution)
    chi_new(Y_new) = P,       phi_new(P_new) = -lam chi_Y(Y) / chi(Y)^3

Transformed families are tabulated along the pivot; as functions of their own
arguments they are monotone piecewise-cubic interpolants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator

from .grid import INTERIOR_BAND, Grid, SampledFunction, diff_matrix
from .verify import ResidualReport

__all__ = [
    "BacklundError",
    "TabulatedFunction",
    "OdeFamily",
    "PivotSolution",
    "BacklundChain",
    "BTransformResult",
    "DiagramReport",
    "chi_cm",
    "constant_mass_family",
    "pivot_from_samples",
    "constant_mass_pivot",
    "ode_residual",
    "s_transform",
    "s_transform_anchored",
    "b_transform",
    "build_chain",
    "closure_check",
    "commute_check",
    "s_involution_defect",
    "family_distance",
    "diagram_families",
    "probe_indices",
]

N_PROBES = 64


class BacklundError(ValueError):
    """A transformation is undefined along the pivot."""


def chi_cm(R):
    """``(R - 3) / (2 R (R - 1))`` with poles at 0 and 1."""
    r = np.asarray(R, dtype=float)
    if np.any(r == 0.0) or np.any(r == 1.0):
        raise BacklundError("chi has poles at R = 0 and R = 1")
    out = (r - 3) / (2 * r * (r - 1))
    return float(out) if out.ndim == 0 else out


class TabulatedFunction:
    """Function known at nodes; exact at the nodes, PCHIP in between."""

    def __init__(self, args: np.ndarray, values: np.ndarray, name: str = ""):
        self.args = np.asarray(args, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.name = name
        d = np.diff(self.args)
        self.monotone = bool(np.all(d > 0) or np.all(d < 0))
        self._interp = None
        if self.monotone:
            order = np.argsort(self.args)
            self._interp = PchipInterpolator(self.args[order], self.values[order], extrapolate=False)

    @property
    def domain(self) -> tuple[float, float]:
        return float(np.min(self.args)), float(np.max(self.args))

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape == self.args.shape and np.array_equal(q, self.args):
            return self.values.copy()
        if self._interp is None:
            raise BacklundError(f"{self.name or 'function'} is multivalued in its argument")
        out = self._interp(q)
        if np.any(np.isnan(out)):
            raise BacklundError(f"{self.name or 'function'} evaluated outside its tabulated domain")
        return out


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class OdeFamily:
    """``Y'' + theta(X) Y' = chi(Y) phi(Y')`` with explicit argument domains."""

    chi: Callable
    phi: Callable
    theta: Callable = _zero
    label: str = ""
    chi_domain: tuple = (-np.inf, np.inf)
    phi_domain: tuple = (-np.inf, np.inf)


@dataclass(frozen=True)
class PivotSolution:
    """A solution sampled along the parameter grid ``s``."""

    s: Grid
    x: np.ndarray
    R: np.ndarray
    Rp: np.ndarray
    Rpp: np.ndarray


@dataclass(frozen=True)
class BTransformResult:
    family: OdeFamily
    pivot: PivotSolution
    lam: float
    lambda_defect: float


@dataclass(frozen=True)
class BacklundChain:
    stages: list  # [(OdeFamily, PivotSolution), ...], stage 0 is the input
    lambdas: tuple
    lambda_defects: tuple = ()

    def to_dict(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "lambda_defects": list(self.lambda_defects),
            "domains": [
                {"x": [float(p.x.min()), float(p.x.max())], "R": [float(p.R.min()), float(p.R.max())]}
                for _, p in self.stages
            ],
        }


def constant_mass_family() -> OdeFamily:
    """``{chi_cm, p^2}`` with ``theta = 0``."""
    return OdeFamily(chi=chi_cm, phi=lambda p: np.asarray(p, dtype=float) ** 2, label="F0")


def pivot_from_samples(R: SampledFunction) -> PivotSolution:
    """Pivot on a uniform grid: ``X = s``, derivatives by finite differences."""
    g = R.grid
    r = np.real(np.asarray(R.values))
    Rp = np.real(diff_matrix(g, 1).entries @ r)
    Rpp = np.real(diff_matrix(g, 2).entries @ r)
    return PivotSolution(g, g.points.copy(), r, Rp, Rpp)


def constant_mass_pivot(g: Grid, branch: str = "minus") -> PivotSolution:
    """Closed-form constant-mass solution with ``sigma = x`` and exact derivatives.

    ``R = x^2/8 - 1 +- (x/2) q`` with ``q = sqrt(x^2/16 - 1)``.
    """
    x = g.points
    if np.any(x**2 / 16 - 1 <= 0):
        raise BacklundError("closed form needs |x| > 4 on the whole grid")
    b = {"plus": 1.0, "minus": -1.0}[branch]
    q = np.sqrt(x**2 / 16 - 1)
    R = x**2 / 8 - 1 + b * x / 2 * q
    Rp = x / 4 + b * (q / 2 + x**2 / (32 * q))
    Rpp = 0.25 + b * (3 * x / (32 * q) - x**3 / (512 * q**3))
    return PivotSolution(g, x.copy(), R, Rp, Rpp)


def _ds(p: PivotSolution, v: np.ndarray) -> np.ndarray:
    return np.real(diff_matrix(p.s, 1).entries @ v)


def _on_pivot(fam: OdeFamily, p: PivotSolution) -> tuple[np.ndarray, np.ndarray]:
    C = np.asarray(fam.chi(p.R), dtype=float)
    Phi = np.asarray(fam.phi(p.Rp), dtype=float)
    return C, Phi


def ode_residual(fam: OdeFamily, p: PivotSolution) -> ResidualReport:
    """Max interior ``|Y'' + theta Y' - chi(Y) phi(Y')|`` along the pivot."""
    C, Phi = _on_pivot(fam, p)
    res = np.abs(p.Rpp + np.asarray(fam.theta(p.x)) * p.Rp - C * Phi)
    b = INTERIOR_BAND
    ab = float(np.max(res[b:-b]))
    scale = float(np.max(np.abs(p.Rpp[b:-b]))) or 1.0
    return ResidualReport(f"ode[{fam.label}]", ab, ab / scale, p.s.n, norm="max")


def s_transform(fam: OdeFamily) -> OdeFamily:
    """Family-level Ŝ: ``phi#(q) = -q^3 phi(1/q)``; chi is carried over."""

    def phi_sharp(q):
        q = np.asarray(q, dtype=float)
        if np.any(q == 0):
            raise BacklundError("phi# needs q != 0")
        return -(q**3) * np.asarray(fam.phi(1.0 / q), dtype=float)

    lo, hi = fam.phi_domain
    return OdeFamily(chi=fam.chi, phi=phi_sharp, theta=_zero, label=f"S({fam.label})", chi_domain=fam.chi_domain)


def s_transform_anchored(fam: OdeFamily, p: PivotSolution) -> tuple[OdeFamily, PivotSolution]:
    """Ŝ along a pivot: swap ``X`` and ``Y`` and re-read ``chi`` in the new variable."""
    if np.any(p.Rp == 0):
        raise BacklundError("P = 0 on the pivot; q = 1/P undefined")
    C, Phi = _on_pivot(fam, p)
    q = 1.0 / p.Rp
    new_p = PivotSolution(p.s, p.R.copy(), p.x.copy(), q, -p.Rpp / p.Rp**3)
    chi_t = TabulatedFunction(new_p.R, C, "chi~")
    phi_t = TabulatedFunction(q, -(q**3) * Phi, "phi#")
    fam_t = OdeFamily(chi_t, phi_t, _zero, f"S({fam.label})", chi_t.domain, phi_t.domain)
    return fam_t, new_p


def b_transform(fam: OdeFamily, p: PivotSolution, lam: float = 1.0, ode_tol: Optional[float] = None) -> BTransformResult:
    """B̂ along the pivot (see module docstring).

    Raises
    ------
    BacklundError
        Non-zero ``theta``, vanishing ``chi``, ``phi``, ``P`` or ``P'`` along the
        pivot, a pivot that fails the family's ODE (when ``ode_tol`` is set),
        or a non-monotone ``X_new``.
    """
    if np.any(np.asarray(fam.theta(p.x)) != 0):
        raise BacklundError("B̂ is defined for theta = 0 only")
    if ode_tol is not None:
        r = ode_residual(fam, p)
        if r.relative > ode_tol:
            raise BacklundError(f"pivot does not satisfy the family's ODE (relative {r.relative:.3g})")
    C, Phi = _on_pivot(fam, p)
    if np.any(p.Rp == 0):
        raise BacklundError("P = 0 on the pivot; q = 1/P undefined")
    if np.any(C == 0) or np.any(np.sign(C[1:]) != np.sign(C[:-1])):
        raise BacklundError("chi vanishes along the pivot")
    if np.any(Phi == 0) or np.any(np.sign(Phi[1:]) != np.sign(Phi[:-1])):
        raise BacklundError("phi vanishes along the pivot")
    if np.any(p.Rpp == 0) or np.any(np.sign(p.Rpp[1:]) != np.sign(p.Rpp[:-1])):
        raise BacklundError("P' vanishes along the pivot")
    Xs = _ds(p, p.x)
    # dX_new/ds = (dP/ds)/phi(P), with dP/ds = P' dX/ds from the pivot
    dXnew = p.Rpp * Xs / Phi
    if not (np.all(dXnew > 0) or np.all(dXnew < 0)):
        raise BacklundError("X_new is not monotone; the chain is not invertible on this pivot")
    X_new = cumulative_simpson(dXnew, dx=p.s.h, initial=0.0)
    Y_new = lam * (p.x - p.x[0])
    P_new = lam * Phi / p.Rpp
    Pp_new = _ds(p, P_new) / dXnew
    # d chi / dY along the pivot
    chi_Y = _ds(p, C) / (p.Rp * Xs)
    Phi_new = -lam * chi_Y / C**3
    chi_b = TabulatedFunction(Y_new, p.Rp, "chi_bar")
    phi_b = TabulatedFunction(P_new, Phi_new, "phi_bar")
    fam_b = OdeFamily(chi_b, phi_b, _zero, f"B({fam.label})", chi_b.domain, phi_b.domain)
    piv_b = PivotSolution(p.s, X_new, Y_new, P_new, Pp_new)
    b = INTERIOR_BAND
    lam_defect = float(np.max(np.abs(P_new * C - lam)[b:-b]) / abs(lam))
    return BTransformResult(fam_b, piv_b, lam, lam_defect)


def build_chain(fam: OdeFamily, p: PivotSolution, lambdas: Sequence[float] = (1.0, 1.0, 1.0), stages: int = 3) -> BacklundChain:
    """Apply B̂ ``stages`` times, one λ per stage."""
    if len(lambdas) < stages:
        raise BacklundError("one lambda per stage is required")
    chain = [(fam, p)]
    defects = []
    for k in range(stages):
        r = b_transform(chain[-1][0], chain[-1][1], lambdas[k])
        chain.append((r.family, r.pivot))
        defects.append(r.lambda_defect)
    return BacklundChain(chain, tuple(float(l) for l in lambdas[:stages]), tuple(defects))


def closure_check(chain: BacklundChain) -> ResidualReport:
    """Three-fold closure defects along the pivot.

    ``details`` holds (i) ``p2 R' chi(R) - 1``, (ii) ``lam2 p3 chi(R) - R'``,
    the ``p2 - 1/(R' chi(R))`` check and the reconstruction defects
    ``|X3 - x|`` and ``|Y3 - R|`` after removing left-end constants.
    ``absolute`` is the larger of (i) and (ii).
    """
    if len(chain.stages) < 4:
        raise BacklundError(f"closure needs 3 stages, chain has {len(chain.stages) - 1}")
    fam0, p0 = chain.stages[0]
    p2 = chain.stages[2][1]
    p3 = chain.stages[3][1]
    b = INTERIOR_BAND
    sl = slice(b, -b)
    chiR = np.asarray(fam0.chi(p0.R), dtype=float)
    lam2 = chain.lambdas[1]
    d1 = np.max(np.abs(p2.Rp * p0.Rp * chiR - 1.0)[sl])
    d2 = np.max(np.abs(lam2 * p3.Rp * chiR - p0.Rp)[sl])
    d429 = np.max(np.abs(p2.Rp - 1.0 / (p0.Rp * chiR))[sl])
    dx = np.max(np.abs((p3.x - p3.x[0]) - (p0.x - p0.x[0])))
    dR = np.max(np.abs((p3.R - p3.R[0]) - (p0.R - p0.R[0])))
    ab = float(max(d1, d2))
    return ResidualReport(
        "closure",
        ab,
        ab,
        p0.s.n,
        norm="max",
        details={
            "identity_i": float(d1),
            "identity_ii": float(d2),
            "p2_check": float(d429),
            "reconstruct_x": float(dx),
            "reconstruct_R": float(dR),
            "x_offset": float(p3.x[0] - p0.x[0]),
            "R_offset": float(p3.R[0] - p0.R[0]),
            "lambdas": list(chain.lambdas),
        },
    )


def probe_indices(n: int, k: int = N_PROBES, band: int = INTERIOR_BAND) -> np.ndarray:
    """``k`` equispaced indices in ``[band, n-1-band]``."""
    return np.unique(np.round(np.linspace(band, n - 1 - band, k)).astype(int))


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def commute_check(fam: OdeFamily, p: PivotSolution, lam: float = 1.0) -> ResidualReport:
    """Compare Ŝ⁻¹∘B̂∘Ŝ with B̂ on probe points of the pivot (Ŝ⁻¹ = Ŝ).

    Both routes produce families tabulated along the same parameter; the
    defect is the larger relative difference of the ``chi`` and ``phi``
    values at the probes.
    """
    idx = probe_indices(p.s.n)
    direct = b_transform(fam, p, lam)
    C_a, Phi_a = _on_pivot(direct.family, direct.pivot)
    f1, p1 = s_transform_anchored(fam, p)
    mid = b_transform(f1, p1, lam)
    f3, p3 = s_transform_anchored(mid.family, mid.pivot)
    C_b, Phi_b = _on_pivot(f3, p3)
    dchi = _rel(C_b[idx], C_a[idx])
    dphi = _rel(Phi_b[idx], Phi_a[idx])
    ab = max(dchi, dphi)
    return ResidualReport("commute", ab, ab, p.s.n, norm="probe", details={"chi": dchi, "phi": dphi})


def s_involution_defect(fam: OdeFamily, probes: np.ndarray) -> float:
    """``max |phi(q) - (S S phi)(q)| / max |phi|`` on the probe arguments."""
    ss = s_transform(s_transform(fam))
    a = np.asarray(fam.phi(probes), dtype=float)
    b = np.asarray(ss.phi(probes), dtype=float)
    return _rel(b, a)


def family_distance(fa: OdeFamily, fb: OdeFamily, k: int = N_PROBES) -> float:
    """Relative sup-distance between two families as functions of their arguments.

    Both ``chi`` and ``phi`` are compared on ``k`` points of the overlap of
    their tabulated domains; disjoint domains give ``inf``.
    """
    dists = []
    for attr in ("chi", "phi"):
        fa_, fb_ = getattr(fa, attr), getattr(fb, attr)
        lo = max(_lo(fa_), _lo(fb_))
        hi = min(_hi(fa_), _hi(fb_))
        if not lo < hi:
            return float("inf")
        pad = 0.02 * (hi - lo)
        q = np.linspace(lo + pad, hi - pad, k)
        try:
            dists.append(_rel(np.asarray(fa_(q), dtype=float), np.asarray(fb_(q), dtype=float)))
        except BacklundError:
            return float("inf")
    return max(dists)


def _lo(f) -> float:
    return f.domain[0] if isinstance(f, TabulatedFunction) else -np.inf


def _hi(f) -> float:
    return f.domain[1] if isinstance(f, TabulatedFunction) else np.inf


@dataclass(frozen=True)
class DiagramReport:
    labels: list
    n_distinct: int
    closes: bool
    closure_distance: float
    distances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "n_distinct": self.n_distinct,
            "closes": self.closes,
            "closure_distance": self.closure_distance,
        }


def diagram_families(
    fam: OdeFamily,
    p: PivotSolution,
    lambdas: Sequence[float] = (1.0, 1.0, 1.0),
    tol: float = 1e-4,
) -> DiagramReport:
    """Generate ``F, ŜF, B̂F, ŜB̂F, B̂²F, ŜB̂²F`` and test ``B̂³F = F``.

    ``fam`` is tabulated along the pivot first so that every node is
    compared on the same footing.
    """
    C0, Phi0 = _on_pivot(fam, p)
    base = OdeFamily(
        TabulatedFunction(p.R, C0, "chi"),
        TabulatedFunction(p.Rp, Phi0, "phi"),
        _zero,
        fam.label or "F",
    )
    chain = build_chain(fam, p, lambdas)
    nodes = []
    for k in range(3):
        f_k, p_k = (base, p) if k == 0 else chain.stages[k]
        nodes.append((f_k.label, f_k))
        fs, _ = s_transform_anchored(f_k, p_k)
        nodes.append((fs.label, fs))
    distinct: list = []
    distances = {}
    for lab, f in nodes:
        ds = [family_distance(f, g) for _, g in distinct]
        for (lg, _), d in zip(distinct, ds):
            distances[f"{lab}|{lg}"] = d
        if all(d > tol for d in ds):
            distinct.append((lab, f))
    closure = family_distance(chain.stages[3][0], base)
    return DiagramReport(
        labels=[lab for lab, _ in nodes],
        n_distinct=len(distinct),
        closes=closure <= tol,
        closure_distance=closure,
        distances=distances,
    )
