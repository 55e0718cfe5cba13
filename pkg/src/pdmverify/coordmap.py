"""Coordinate maps ``x <-> xi`` with Jacobian ``R = dx/dxi``.

``R`` is excluded from the values 0 and 1 everywhere.  Re-tabulation onto a
uniform ``xi`` grid uses monotone piecewise-cubic (PCHIP) interpolation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .grid import (
    INTERIOR_BAND,
    Grid,
    GridError,
    SampledFunction,
    cumulative_integral,
    derivative,
    make_grid,
)
from .verify import ResidualReport

__all__ = [
    "CoordMapError",
    "FMap",
    "CoordinateMap",
    "R_from_F",
    "map_f",
    "xi_from_R",
    "modified_mass",
    "retabulate_on_xi",
    "invert_xi",
    "check_f_transform",
    "F_from_R",
    "sigma_fn",
    "R_closed_form",
    "ode_residual_4_18",
    "xi_closed_form",
    "chi_ode",
    "build_coordinate_map",
]

SINGULAR_TOL = 1e-9


class CoordMapError(ValueError):
    """Singular or non-invertible coordinate map."""


def _real(f: SampledFunction) -> np.ndarray:
    return np.real(np.asarray(f.values, dtype=complex))


def _anchor(g: Grid) -> float:
    """Base point of indefinite integrals: 0 when on the grid, else ``x_min``."""
    try:
        g.index_of(0.0)
        return 0.0
    except GridError:
        return g.points[0]


def _check_nonsingular(r: np.ndarray, g: Grid, what: str = "R") -> None:
    if np.any(np.abs(r) < SINGULAR_TOL) or np.any(np.sign(r[1:]) != np.sign(r[:-1])):
        raise CoordMapError(f"{what} touches 0 on the grid")
    if np.any(np.abs(r - 1.0) < SINGULAR_TOL):
        k = int(np.argmin(np.abs(r - 1.0)))
        raise CoordMapError(f"{what} touches the excluded value 1 near x={g.points[k]:.6g}")


def _check_positive(r: np.ndarray) -> None:
    if np.any(r <= 0):
        raise CoordMapError("R must be positive for the map to be monotone")


def R_from_F(F: SampledFunction, U: SampledFunction, delta: float) -> SampledFunction:
    """``R = 1 + delta * exp(-2 int_0^x F/U)``."""
    g = F.grid
    if np.any(_real(U) <= 0):
        raise CoordMapError("U must be positive")
    if delta == 0:
        raise CoordMapError("delta = 0 gives R = 1 identically")
    expo = -2.0 * _real(cumulative_integral(F / U, _anchor(g)))
    if np.max(expo) > 700:
        raise CoordMapError("exponent overflow in R")
    r = 1.0 + delta * np.exp(expo)
    _check_nonsingular(r, g)
    return SampledFunction(g, r)


@dataclass(frozen=True)
class FMap:
    """Both forms of the mapped generating function and their gap.

    ``f`` is ``S F = F/R``; ``f_log`` is ``F + U (ln sqrt R)'``.
    """

    f: SampledFunction
    f_log: SampledFunction
    gap: float


def map_f(F: SampledFunction, U: SampledFunction, R: SampledFunction) -> FMap:
    r = _real(R)
    _check_nonsingular(r, R.grid)
    f = SampledFunction(F.grid, _real(F) / r)
    # (ln sqrt R)' = R'/(2R), valid for either sign of R
    f_log = SampledFunction(F.grid, _real(F) + _real(U) * _real(derivative(R)) / (2 * r))
    b = INTERIOR_BAND
    gap = float(np.max(np.abs(f.values - f_log.values)[b:-b]))
    return FMap(f, f_log, gap)


def F_from_R(R: SampledFunction, U: SampledFunction) -> SampledFunction:
    """Invert the R equation: ``F = (U R/(1-R)) (ln sqrt R)'``."""
    r = _real(R)
    _check_nonsingular(r, R.grid)
    return SampledFunction(R.grid, _real(U) * r / (1 - r) * _real(derivative(R)) / (2 * r))


def xi_from_R(R: SampledFunction) -> SampledFunction:
    """``xi = int_0^x dx'/R`` (base ``x_min`` when 0 is off the grid)."""
    r = _real(R)
    _check_positive(r)
    return SampledFunction(R.grid, _real(cumulative_integral(SampledFunction(R.grid, 1.0 / r), _anchor(R.grid))))


def modified_mass(U: SampledFunction, R: SampledFunction) -> SampledFunction:
    """``U_mod = U dxi/dx = U/R`` as a function of ``x``."""
    r = _real(R)
    _check_positive(r)
    return SampledFunction(U.grid, _real(U) / r)


def retabulate_on_xi(values: SampledFunction, xi: SampledFunction, n: Optional[int] = None) -> SampledFunction:
    """Re-sample ``values`` (given at ``x``) on a uniform grid in ``xi``."""
    xv = _real(xi)
    d = np.diff(xv)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise CoordMapError("xi is not strictly monotone")
    if d[0] < 0:
        xv = xv[::-1]
        v = np.asarray(values.values)[::-1]
    else:
        v = np.asarray(values.values)
    g = make_grid(xv[0], xv[-1], n or len(xv))
    pts = np.clip(g.points, xv[0], xv[-1])
    out = PchipInterpolator(xv, np.real(v))(pts)
    if np.iscomplexobj(v):
        out = out + 1j * PchipInterpolator(xv, np.imag(v))(pts)
    return SampledFunction(g, out)


def invert_xi(xi: SampledFunction, xi_values: np.ndarray) -> np.ndarray:
    """``x(xi)`` by monotone interpolation of the tabulated ``xi(x)``."""
    xv = _real(xi)
    if not np.all(np.diff(xv) > 0):
        raise CoordMapError("xi is not strictly increasing")
    return PchipInterpolator(xv, xi.grid.points)(xi_values)


def check_f_transform(U: SampledFunction, F: SampledFunction, G: SampledFunction) -> ResidualReport:
    """Residual of ``f(xi) - U_mod'(xi)/2`` with ``R`` identified with ``G``.

    ``f = F/R`` and ``U_mod = U/R`` are re-tabulated on a uniform ``xi`` grid
    and the derivative is taken in ``xi``.
    """
    R = G
    r = _real(R)
    if np.any(r <= 0):
        raise CoordMapError("xi is not monotone (R = G must stay positive)")
    _check_nonsingular(r, R.grid)
    xi = xi_from_R(R)
    f_xi = retabulate_on_xi(map_f(F, U, R).f, xi)
    U_xi = retabulate_on_xi(modified_mass(U, R), xi)
    res = np.abs(_real(f_xi) - 0.5 * _real(derivative(U_xi)))
    b = INTERIOR_BAND
    ab = float(np.max(res[b:-b]))
    scale = float(np.max(np.abs(_real(f_xi)))) or 1.0
    return ResidualReport("f_transform", ab, ab / scale, R.grid.n, norm="max")


def sigma_fn(
    U: SampledFunction,
    lambda1: float,
    lambda2: float,
    x0: float = 0.0,
    U_fn: Optional[Callable[[float], float]] = None,
) -> SampledFunction:
    """``sigma = lambda1 int_{x0}^x dx'/U^2 + lambda2``.

    When ``x0`` is off the grid the stretch from ``x0`` to ``x_min`` is
    integrated adaptively with ``U_fn``, which must then be supplied.
    """
    g = U.grid
    u = _real(U)
    if np.any(u <= 0):
        raise CoordMapError("U must be positive")
    inv = SampledFunction(g, 1.0 / u**2)
    try:
        g.index_of(x0)
        base = _real(cumulative_integral(inv, x0))
    except GridError:
        if U_fn is None:
            raise CoordMapError("base point is off the grid; pass U_fn to bridge it") from None
        offset, _ = quad(lambda t: 1.0 / U_fn(t) ** 2, x0, g.points[0], epsabs=1e-14, epsrel=1e-13)
        base = offset + _real(cumulative_integral(inv, g.points[0]))
    return SampledFunction(g, lambda1 * base + lambda2)


def R_closed_form(sigma: SampledFunction, branch: str, margin: float = 0.25) -> SampledFunction:
    """``R = sigma^2/8 - 1 +- (sigma/2) sqrt(sigma^2/16 - 1)``.

    Requires ``|sigma| >= 4 + margin`` on the whole grid.
    """
    s = _real(sigma)
    if branch not in ("plus", "minus"):
        raise ValueError("branch must be 'plus' or 'minus'")
    if np.any(s**2 / 16 - 1 < 0):
        raise CoordMapError("|sigma| < 4 somewhere: no real root")
    if np.any(np.abs(s) < 4 + margin):
        raise CoordMapError(f"|sigma| within {margin} of 4, where R = 1")
    sign = 1.0 if branch == "plus" else -1.0
    # the root whose two terms share a sign is computed directly; the other
    # one is its reciprocal (the branches multiply to 1), avoiding cancellation
    big = s**2 / 8 - 1 + np.abs(s / 2) * np.sqrt(s**2 / 16 - 1)
    r = np.where(sign * s > 0, big, 1.0 / big)
    return SampledFunction(sigma.grid, r)


def chi_ode(r: np.ndarray) -> np.ndarray:
    """``(R - 3) / (2 R (R - 1))``."""
    return (r - 3) / (2 * r * (r - 1))


def ode_residual_4_18(R: SampledFunction, U: SampledFunction) -> ResidualReport:
    """Max interior residual of ``R'' + theta R' - chi(R) R'^2`` with ``theta = 2 U'/U``."""
    r = _real(R)
    _check_nonsingular(r, R.grid)
    u = _real(U)
    Rp = _real(derivative(R))
    Rpp = _real(derivative(R, 2))
    theta = 2 * _real(derivative(U)) / u
    res = np.abs(Rpp + theta * Rp - chi_ode(r) * Rp**2)
    b = INTERIOR_BAND
    ab = float(np.max(res[b:-b]))
    scale = float(np.max(np.abs(Rpp[b:-b]))) or 1.0
    return ResidualReport("ode", ab, ab / scale, R.grid.n, norm="max")


def xi_closed_form(sigma: SampledFunction, branch: str, c: float = 0.0, margin: float = 0.25) -> SampledFunction:
    """``xi = c + int dx'/R_closed(sigma)`` (base 0 if on the grid, else ``x_min``)."""
    R = R_closed_form(sigma, branch, margin)
    g = sigma.grid
    return SampledFunction(g, c + _real(cumulative_integral(1.0 / R, _anchor(g))))


@dataclass(frozen=True)
class CoordinateMap:
    grid_x: Grid
    R: SampledFunction
    S: SampledFunction
    xi: SampledFunction
    U_modified: SampledFunction
    Z: SampledFunction
    sigma: SampledFunction
    branch: str = "plus"

    def to_csv(self, path: Union[str, Path]) -> None:
        """Columns ``x, R, xi, U_modified``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "R", "xi", "U_modified"])
            for row in zip(self.grid_x.points, _real(self.R), _real(self.xi), _real(self.U_modified)):
                w.writerow([repr(float(v)) for v in row])

    def to_json(self) -> str:
        return json.dumps(
            {
                "x": self.grid_x.points.tolist(),
                "R": _real(self.R).tolist(),
                "xi": _real(self.xi).tolist(),
                "U_modified": _real(self.U_modified).tolist(),
                "branch": self.branch,
            }
        )


def build_coordinate_map(
    U: SampledFunction,
    R: SampledFunction,
    G: Optional[SampledFunction] = None,
    lambda1: float = 1.0,
    lambda2: float = 0.0,
    branch: str = "plus",
    sigma: Optional[SampledFunction] = None,
) -> CoordinateMap:
    """Bundle ``R, S, xi, U_mod, Z, sigma`` for a given Jacobian ``R``.

    ``sigma`` defaults to :func:`sigma_fn` anchored at 0, or at ``x_min``
    when 0 is off the grid.
    """
    g = U.grid
    r = _real(R)
    _check_nonsingular(r, g)
    if G is None:
        Z = SampledFunction(g, np.full(g.n, np.nan))
    else:
        gv = _real(G)
        with np.errstate(divide="ignore", invalid="ignore"):
            Z = SampledFunction(g, np.where(gv != 0, _real(U) / gv, np.nan))
    if sigma is None:
        sigma = sigma_fn(U, lambda1, lambda2, x0=_anchor(g))
    return CoordinateMap(
        grid_x=g,
        R=SampledFunction(g, r),
        S=SampledFunction(g, 1.0 / r),
        xi=xi_from_R(R),
        U_modified=modified_mass(U, R),
        Z=Z,
        sigma=sigma,
        branch=branch,
    )
