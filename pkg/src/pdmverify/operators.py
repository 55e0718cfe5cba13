"""Discretized operators: Hamiltonians, intertwiners, gauge and parity maps.

Every operator is assembled with the Dirichlet-closed stencils of
:func:`pdmverify.grid.dirichlet_matrix` and sandwiched between the interior
projector ``P`` (zero on the two end points).  Coefficient functions are
differentiated with the one-sided data stencils of ``diff_matrix``.

The modified Hamiltonian has two discretizations:

``factored``
    ``-(D - i a/U) U^2 (D - i a/U) + V``, the form the intertwining
    identities are built from.  ``D U^2 D`` uses the wide stencil, so this
    form matches ``zeta^H zeta`` exactly in structure.
``expanded``
    ``-U^2 D2 - 2 M D1 + N + V`` with the compact second-derivative stencil.
    Preferred for spectra: the wide stencil of the factored form decouples
    even and odd sites and doubles high eigenvalues.

Binary export layout: 8-byte magic ``b"PDMOP\\x00\\x01\\x00"``, the dimension
``n`` as little-endian uint64, then ``n*n`` complex entries in row-major order,
each stored as two little-endian float64 values ``(re, im)``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .grid import (
    Grid,
    GridError,
    OperatorMatrix,
    SampledFunction,
    boundary_projector,
    derivative,
    dirichlet_matrix,
    parity_matrix,
)
from .model import (
    ModelError,
    ModelSpec,
    f_from_U,
    gauge_phase_alpha,
    potential_V_minus,
    potential_V_plus,
    resolve_F,
    sample,
    sample_U,
)

__all__ = [
    "OperatorCoefficients",
    "OperatorBundle",
    "coefficients",
    "build_H0",
    "build_modified_H",
    "build_zeta",
    "build_eta_plus",
    "build_eta_minus",
    "build_eta_exp_parity",
    "apply_tau",
    "build_h_her",
    "build_bundle",
    "write_binary",
    "read_binary",
    "write_csv",
]

_MAGIC = b"PDMOP\x00\x01\x00"


@dataclass(frozen=True)
class OperatorCoefficients:
    """``K, L`` of the closed-form intertwiner and ``M, N`` of the Hamiltonian."""

    K: SampledFunction
    L: SampledFunction
    M: SampledFunction
    N: SampledFunction


@dataclass(frozen=True)
class OperatorBundle:
    H: OperatorMatrix
    H_dag: OperatorMatrix
    eta_plus: OperatorMatrix
    eta_minus: OperatorMatrix
    zeta: OperatorMatrix
    zeta_dag: OperatorMatrix
    eta_exp_parity: Optional[OperatorMatrix]
    rho: SampledFunction
    h_her: OperatorMatrix


def _P(g: Grid) -> sp.csr_matrix:
    return boundary_projector(g)


def _dg(v) -> sp.csr_matrix:
    if isinstance(v, SampledFunction):
        v = v.values
    return sp.diags(np.asarray(v, dtype=complex), 0, format="csr")


def _close(g: Grid, m) -> OperatorMatrix:
    P = _P(g)
    return OperatorMatrix(g, (P @ m @ P).tocsr())


def coefficients(U: SampledFunction, a: SampledFunction, F: SampledFunction, G: SampledFunction) -> OperatorCoefficients:
    """Coefficient functions with ``b = 0``.

    ``K = U U' - i U (a - G)``,
    ``L = F^2 + (a - G)^2 - (U F)' + i (U (a - G))'``,
    ``M = U U' - i U a``,
    ``N = a^2 + i (U a)'``.
    """
    Up = derivative(U)
    aG = a - G
    K = U * Up - 1j * U * aG
    L = F * F + aG * aG - derivative(U * F) + 1j * derivative(U * aG)
    M = U * Up - 1j * U * a
    N = a * a + 1j * derivative(U * a)
    return OperatorCoefficients(K, L, M, N)


def build_H0(U: SampledFunction, V: SampledFunction) -> OperatorMatrix:
    """``p U^2 p + V`` as ``-D1 diag(U^2) D1 + diag(V)``."""
    g = U.grid
    D1 = dirichlet_matrix(g, 1).entries
    return _close(g, -D1 @ _dg(U * U) @ D1 + _dg(V))


def build_modified_H(U: SampledFunction, a: SampledFunction, V: SampledFunction, form: str = "expanded") -> OperatorMatrix:
    """Modified Hamiltonian with real vector potential ``a``.

    Parameters
    ----------
    form : {"expanded", "factored"}
        See the module docstring.
    """
    g = U.grid
    if form == "expanded":
        Up = derivative(U)
        M = U * Up - 1j * U * a
        N = a * a + 1j * derivative(U * a)
        D1 = dirichlet_matrix(g, 1).entries
        D2 = dirichlet_matrix(g, 2).entries
        return _close(g, -_dg(U * U) @ D2 - 2 * _dg(M) @ D1 + _dg(N + V))
    if form == "factored":
        P = _P(g)
        K = P @ (dirichlet_matrix(g, 1).entries - 1j * _dg(a / U)) @ P
        return _close(g, -K @ _dg(U * U) @ K + _dg(V))
    raise ValueError(f"unknown form {form!r}")


def build_zeta(
    U: SampledFunction,
    F: SampledFunction,
    G: SampledFunction,
    a: SampledFunction,
    adjoint: str = "transcribed",
) -> tuple[OperatorMatrix, OperatorMatrix]:
    """``zeta = U D + (-i a + W)`` and its adjoint, ``W = F + iG``.

    ``adjoint="transcribed"`` assembles ``-D U + (i a + W*)``;
    ``"conjugate_transpose"`` returns the matrix adjoint of ``zeta``.  With
    the Dirichlet closure the two coincide to roundoff.
    """
    g = U.grid
    D1 = dirichlet_matrix(g, 1).entries
    W = F + 1j * G
    Z = _close(g, _dg(U) @ D1 + _dg(-1j * a + W))
    if adjoint == "transcribed":
        Zd = _close(g, -D1 @ _dg(U) + _dg(1j * a + np.conj(W.values)))
    elif adjoint == "conjugate_transpose":
        Zd = Z.H
    else:
        raise ValueError(f"unknown adjoint variant {adjoint!r}")
    return Z, Zd


def build_eta_plus(
    U: SampledFunction,
    F: SampledFunction,
    G: SampledFunction,
    a: SampledFunction,
    mode: str = "product",
) -> OperatorMatrix:
    """Hermitian intertwiner ``zeta^H zeta`` or its closed form ``-U^2 D2 - 2K D1 + L``."""
    g = U.grid
    if mode == "product":
        Z, _ = build_zeta(U, F, G, a, adjoint="conjugate_transpose")
        return Z.H @ Z
    if mode == "closed_form":
        c = coefficients(U, a, F, G)
        D1 = dirichlet_matrix(g, 1).entries
        D2 = dirichlet_matrix(g, 2).entries
        return _close(g, -_dg(U * U) @ D2 - 2 * _dg(c.K) @ D1 + _dg(c.L))
    raise ValueError(f"unknown mode {mode!r}")


def build_eta_minus(
    U: SampledFunction,
    f: SampledFunction,
    g_fn: SampledFunction,
    a: SampledFunction,
    check_f: bool = True,
    f_tol: float = 1e-4,
) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Anti-Hermitian intertwiner ``U D - i a + w`` with ``w = f + i g``.

    Returns the operator and its transcribed adjoint ``-D U + i a + w*``.

    Raises
    ------
    ModelError
        ``check_f`` is set and ``max |f - U'/2|`` exceeds ``f_tol``.
    """
    g = U.grid
    if check_f:
        gap = float(np.max(np.abs(f.values - 0.5 * derivative(U).values)))
        if gap > f_tol:
            raise ModelError(f"f differs from U'/2 by {gap:.3g} (> {f_tol:g})")
    D1 = dirichlet_matrix(g, 1).entries
    w = f + 1j * g_fn
    E = _close(g, _dg(U) @ D1 + _dg(-1j * a + w))
    Ed = _close(g, -D1 @ _dg(U) + _dg(1j * a + np.conj(w.values)))
    return E, Ed


def build_eta_exp_parity(alpha: SampledFunction, g: Grid, tol: float = 1e-10) -> OperatorMatrix:
    """``diag(exp(-i alpha)) P`` for a real odd phase ``alpha``."""
    if not g.symmetric:
        raise GridError("parity needs a symmetric grid")
    al = np.asarray(alpha.values)
    if np.max(np.abs(np.imag(al))) > tol:
        raise ModelError("alpha must be real")
    al = np.real(al)
    scale = max(1.0, float(np.max(np.abs(al))))
    if np.max(np.abs(al + al[::-1])) > tol * scale:
        raise ModelError("alpha is not odd; the vector potential must be even")
    P = parity_matrix(g)
    return OperatorMatrix(g, _dg(np.exp(-1j * al)) @ P.entries)


def apply_tau(alpha: SampledFunction, v: np.ndarray) -> np.ndarray:
    """Antilinear map ``v -> conj(exp(i alpha) v)``."""
    return np.conj(np.exp(1j * np.real(alpha.values)) * np.asarray(v))


def build_h_her(rho: SampledFunction, H: OperatorMatrix) -> OperatorMatrix:
    """``diag(rho) H diag(rho)^-1``."""
    r = np.asarray(rho.values, dtype=complex)
    if np.min(np.abs(r)) < 1e-300:
        raise ModelError("rho vanishes on the grid")
    return OperatorMatrix(H.grid, _dg(r) @ H.entries @ _dg(1.0 / r))


def build_bundle(spec: ModelSpec, g: Grid, form: str = "expanded", check_f: bool = True) -> OperatorBundle:
    """Assemble every operator of one scenario on one grid."""
    U = sample_U(spec, g)
    a = sample(spec.a_expr, g)
    G = sample(spec.G_expr, g)
    F = resolve_F(spec, g)
    Vp = potential_V_plus(F, G, U, spec.epsilon)
    H = build_modified_H(U, a, Vp, form=form)
    Z, Zd = build_zeta(U, F, G, a)
    eta_p = build_eta_plus(U, F, G, a, mode="product")
    f = f_from_U(spec, g)
    eta_m, _ = build_eta_minus(U, f, sample(spec.g_expr, g), a, check_f=check_f)
    if g.symmetric:
        alpha = gauge_phase_alpha(spec, g)
        try:
            eta_exp = build_eta_exp_parity(alpha, g)
        except ModelError:
            eta_exp = None
    else:
        alpha = SampledFunction(g, np.zeros(g.n))
        eta_exp = None
    rho = alpha.map(lambda v: np.exp(-0.5j * np.real(v)))
    return OperatorBundle(
        H=H,
        H_dag=H.H,
        eta_plus=eta_p,
        eta_minus=eta_m,
        zeta=Z,
        zeta_dag=Zd,
        eta_exp_parity=eta_exp,
        rho=rho,
        h_her=build_h_her(rho, H),
    )


def write_binary(op: OperatorMatrix, path: Union[str, Path]) -> None:
    """Write the dense matrix in the layout described in the module docstring."""
    m = np.ascontiguousarray(op.dense, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", m.shape[0]))
        fh.write(m.tobytes(order="C"))


def read_binary(path: Union[str, Path], grid: Grid) -> OperatorMatrix:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not an operator file")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<c16")
    if n != grid.n or data.size != n * n:
        raise GridError("stored dimension does not match grid")
    return OperatorMatrix(grid, data.reshape(n, n))


def write_csv(op: OperatorMatrix, path: Union[str, Path], max_n: int = 512) -> None:
    """Write non-zero entries as rows ``row, col, re, im``."""
    if op.grid.n > max_n:
        raise ValueError(f"CSV export is limited to n <= {max_n}")
    coo = op.entries.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for k in order:
            v = complex(coo.data[k])
            w.writerow([int(coo.row[k]), int(coo.col[k]), repr(v.real), repr(v.imag)])
