"""Uniform 1-D grids, finite-difference matrices, quadrature and parity.

Two families of difference matrices are provided.

``diff_matrix`` differentiates *sampled data*.  Interior rows use the central
second-order stencils ``[-1, 0, 1]/(2h)`` and ``[1, -2, 1]/h**2``.  The two
boundary rows are one-sided and second-order accurate::

    first derivative,  row 0:    [-3, 4, -1] / (2h)
    first derivative,  row n-1:  [1, -4, 3] / (2h)
    second derivative, row 0:    [2, -5, 4, -1] / h**2
    second derivative, row n-1:  [-1, 4, -5, 2] / h**2

``dirichlet_matrix`` builds the *operator* stencils used to assemble
Hamiltonians.  It keeps the central stencils and zeroes the first and last
rows and columns, which encodes wavefunctions vanishing at the grid ends.
The first-derivative matrix is then exactly skew-symmetric and the second
exactly symmetric, so discrete adjoints behave like their continuum
counterparts.

Matrices are stored as ``scipy.sparse`` CSR inside :class:`OperatorMatrix`;
``.dense`` returns the full array when needed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridError",
    "Grid",
    "SampledFunction",
    "OperatorMatrix",
    "make_grid",
    "diff_matrix",
    "dirichlet_matrix",
    "boundary_projector",
    "derivative",
    "integrate",
    "cumulative_integral",
    "parity_matrix",
    "INTERIOR_BAND",
]

INTERIOR_BAND = 2


class GridError(ValueError):
    """Invalid grid construction or incompatible grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[x_min, x_max]`` with ``n`` points.

    Symmetric grids (``x_min == -x_max``) are built so that
    ``points[i] == -points[n-1-i]`` holds exactly.
    """

    x_min: float
    x_max: float
    n: int
    points: np.ndarray = field(repr=False, compare=False)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def symmetric(self) -> bool:
        return self.x_min == -self.x_max

    def index_of(self, x0: float, rtol: float = 1e-9) -> int:
        """Index of the grid point equal to ``x0`` (to ``rtol * h``)."""
        k = int(round((x0 - self.x_min) / self.h))
        if 0 <= k < self.n and abs(self.points[k] - x0) <= rtol * self.h:
            return k
        raise GridError(f"x0={x0!r} is not a grid point")

    def same_as(self, other: "Grid") -> bool:
        return (self.x_min, self.x_max, self.n) == (other.x_min, other.x_max, other.n)


def make_grid(x_min: float, x_max: float, n: int) -> Grid:
    """Build a uniform grid.

    Examples
    --------
    >>> make_grid(-1, 1, 5).points
    array([-1. , -0.5,  0. ,  0.5,  1. ])
    """
    x_min, x_max = float(x_min), float(x_max)
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_min >= x_max:
        raise GridError(f"invalid range [{x_min}, {x_max}]")
    if int(n) != n or n < 3:
        raise GridError(f"need at least 3 points, got {n}")
    n = int(n)
    pts = np.linspace(x_min, x_max, n)
    if x_min == -x_max:
        # mirror the left half so the grid is symmetric bit for bit
        half = n // 2
        pts[n - half :] = -pts[:half][::-1]
        if n % 2:
            pts[half] = 0.0
    pts.setflags(write=False)
    return Grid(x_min, x_max, n, pts)


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples of a function on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} samples, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def real(self) -> np.ndarray:
        return np.real(self.values)

    @property
    def imag(self) -> np.ndarray:
        return np.imag(self.values)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def _coerce(self, other):
        if isinstance(other, SampledFunction):
            if not self.grid.same_as(other.grid):
                raise GridError("grids differ")
            return other.values
        return other

    def __add__(self, other):
        return SampledFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return SampledFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return SampledFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return SampledFunction(self.grid, self.values / self._coerce(other))

    def __rtruediv__(self, other):
        return SampledFunction(self.grid, self._coerce(other) / self.values)

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def map(self, fn) -> "SampledFunction":
        return SampledFunction(self.grid, fn(self.values))

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write columns ``x, re, im`` with a header row."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re", "im"])
            for x, v in zip(self.grid.points, np.asarray(self.values, dtype=complex)):
                w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])

    def to_json(self) -> str:
        """JSON object with arrays ``x``, ``re`` and ``im``."""
        v = np.asarray(self.values, dtype=complex)
        return json.dumps(
            {"x": self.grid.points.tolist(), "re": v.real.tolist(), "im": v.imag.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "SampledFunction":
        d = json.loads(text)
        x = np.asarray(d["x"], dtype=float)
        g = make_grid(x[0], x[-1], len(x))
        return cls(g, np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


@dataclass(frozen=True)
class OperatorMatrix:
    """Square complex matrix acting on samples of a grid (sparse storage)."""

    grid: Grid
    entries: sp.csr_matrix

    def __post_init__(self):
        m = self.entries
        if not sp.issparse(m):
            m = sp.csr_matrix(np.asarray(m))
        else:
            m = sp.csr_matrix(m)
        if m.shape != (self.grid.n, self.grid.n):
            raise GridError(f"matrix shape {m.shape} does not match grid size {self.grid.n}")
        object.__setattr__(self, "entries", m)

    @property
    def dense(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def H(self) -> "OperatorMatrix":
        """Conjugate transpose."""
        return OperatorMatrix(self.grid, self.entries.conj().T.tocsr())

    def _coerce(self, other):
        if isinstance(other, OperatorMatrix):
            if not self.grid.same_as(other.grid):
                raise GridError("grids differ")
            return other.entries
        raise TypeError(f"cannot combine OperatorMatrix with {type(other).__name__}")

    def __matmul__(self, other):
        if isinstance(other, SampledFunction):
            return SampledFunction(self.grid, self.entries @ other.values)
        if isinstance(other, np.ndarray):
            return self.entries @ other
        return OperatorMatrix(self.grid, self.entries @ self._coerce(other))

    def __add__(self, other):
        return OperatorMatrix(self.grid, self.entries + self._coerce(other))

    def __sub__(self, other):
        return OperatorMatrix(self.grid, self.entries - self._coerce(other))

    def __mul__(self, scalar):
        return OperatorMatrix(self.grid, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return OperatorMatrix(self.grid, -self.entries)

    @staticmethod
    def diag(values: Union[SampledFunction, np.ndarray], grid: Grid = None) -> "OperatorMatrix":
        if isinstance(values, SampledFunction):
            grid, values = values.grid, values.values
        return OperatorMatrix(grid, sp.diags(np.asarray(values), 0, format="csr"))


def diff_matrix(g: Grid, order: int) -> OperatorMatrix:
    """Difference matrix for sampled data with one-sided boundary rows."""
    n, h = g.n, g.h
    if order == 1:
        D = (sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * h)).tolil()
        D[0, :] = 0
        D[n - 1, :] = 0
        D[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
        D[n - 1, n - 3 :] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    elif order == 2:
        if n < 4:
            raise GridError("second derivative needs at least 4 points")
        D = (sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2).tolil()
        D[0, :] = 0
        D[n - 1, :] = 0
        D[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        D[n - 1, n - 4 :] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
    else:
        raise GridError(f"order must be 1 or 2, got {order}")
    return OperatorMatrix(g, D.tocsr().astype(complex))


def boundary_projector(g: Grid) -> sp.csr_matrix:
    """Diagonal projector onto the interior (zero at the two end points)."""
    d = np.ones(g.n)
    d[0] = d[-1] = 0.0
    return sp.diags(d, 0, format="csr")


def dirichlet_matrix(g: Grid, order: int) -> OperatorMatrix:
    """Central difference operator closed with homogeneous Dirichlet ends."""
    n, h = g.n, g.h
    if order == 1:
        D = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * h)
    elif order == 2:
        D = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2
    else:
        raise GridError(f"order must be 1 or 2, got {order}")
    P = boundary_projector(g)
    return OperatorMatrix(g, (P @ D @ P).tocsr().astype(complex))


def derivative(f: SampledFunction, order: int = 1) -> SampledFunction:
    """Numerical derivative of sampled data via :func:`diff_matrix`."""
    return diff_matrix(f.grid, order) @ f


def integrate(f: SampledFunction) -> complex:
    """Trapezoid rule over the whole grid."""
    v = np.asarray(f.values)
    res = f.grid.h * (v.sum() - 0.5 * (v[0] + v[-1]))
    return complex(res) if np.iscomplexobj(v) else float(res)


def cumulative_integral(f: SampledFunction, x0: float = 0.0) -> SampledFunction:
    """Trapezoid accumulation of ``f`` outward from the grid point ``x0``.

    Accumulating away from ``x0`` on both sides makes the integral of an odd
    function on a symmetric grid exactly even (and vice versa).
    """
    g = f.grid
    k = g.index_of(x0)
    v = np.asarray(f.values)
    seg = 0.5 * g.h * (v[1:] + v[:-1])
    out = np.zeros_like(v, dtype=np.result_type(v, float))
    out[k + 1 :] = np.cumsum(seg[k:])
    if k > 0:
        out[:k] = -np.cumsum(seg[:k][::-1])[::-1]
    return SampledFunction(g, out)


def parity_matrix(g: Grid) -> OperatorMatrix:
    """Anti-diagonal permutation with ``(Pv)[i] = v[n-1-i]``."""
    if not g.symmetric:
        raise GridError("parity needs a symmetric grid")
    n = g.n
    P = sp.csr_matrix((np.ones(n), (np.arange(n), np.arange(n)[::-1])), shape=(n, n))
    return OperatorMatrix(g, P.astype(complex))
