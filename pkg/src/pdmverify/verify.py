"""Numerical verdicts on assembled operators.

Residuals are measured on the interior block that drops ``INTERIOR_BAND``
rows and columns at each end.  Two norms are used.

``frobenius``
    ``||A_int||_F``; for intertwining residuals the relative value divides
    by ``||eta_int||_F * ||H_int||_F``.
``probe``
    ``||A Q||_F / ||B Q||_F`` over the interior rows, where the columns of
    ``Q`` are the first eight sine modes of the box (smooth and vanishing at
    both ends).  This measures how two discretizations of the *same*
    operator differ on resolved functions; entrywise Frobenius norms of
    such differences are dominated by grid-scale modes and converge at
    first order only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .grid import (
    INTERIOR_BAND,
    GridError,
    OperatorMatrix,
    SampledFunction,
    derivative,
    integrate,
    parity_matrix,
)

__all__ = [
    "VerifyError",
    "ResidualReport",
    "HermiticityReport",
    "SpectralReport",
    "ContinuityRecord",
    "probe_matrix",
    "intertwining_residual",
    "hermiticity_class",
    "spectrum",
    "eigenpairs",
    "eta_orthogonality",
    "evolve_conservation",
    "tau_residual",
    "factorization_residual",
    "decomposition_residual",
    "similarity_residual",
    "convergence_order",
]


class VerifyError(ValueError):
    """A verification precondition failed."""


@dataclass(frozen=True)
class ResidualReport:
    name: str
    absolute: float
    relative: float
    grid_n: int
    interior_band: int = INTERIOR_BAND
    norm: str = "frobenius"
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "absolute": self.absolute,
            "relative": self.relative,
            "grid_n": self.grid_n,
            "interior_band": self.interior_band,
            "norm": self.norm,
            "details": dict(sorted(self.details.items())),
        }


@dataclass(frozen=True)
class HermiticityReport:
    kind: str  # "hermitian" | "anti_hermitian" | "neither"
    defect: float
    hermitian_defect: float
    anti_hermitian_defect: float


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    reality_max_imag: float
    conjugate_pair_defect: float

    def lowest(self, k: int) -> np.ndarray:
        return self.eigenvalues[:k]


@dataclass(frozen=True)
class ContinuityRecord:
    times: np.ndarray
    rho_eta_integral: np.ndarray

    @property
    def relative_drift(self) -> float:
        I = self.rho_eta_integral
        return float(np.max(np.abs(I - I[0])) / abs(I[0]))


def _interior(m, b: int = INTERIOR_BAND):
    n = m.shape[0]
    return m[b : n - b, b : n - b]


def _fro(m) -> float:
    if sp.issparse(m):
        return float(sp.linalg.norm(m))
    return float(np.linalg.norm(m))


def _same_grid(*ops: OperatorMatrix) -> None:
    g = ops[0].grid
    for o in ops[1:]:
        if not o.grid.same_as(g):
            raise GridError("operators live on different grids")


def probe_matrix(grid, k: int = 8) -> np.ndarray:
    """Columns ``sin(j pi (x - x_min)/L)`` for ``j = 1..k``."""
    L = grid.x_max - grid.x_min
    x = grid.points - grid.x_min
    return np.column_stack([np.sin(j * np.pi * x / L) for j in range(1, k + 1)])


def _probe_rel(A: sp.spmatrix, B: sp.spmatrix, grid, b: int = INTERIOR_BAND) -> tuple[float, float]:
    Q = probe_matrix(grid)
    n = grid.n
    num = np.linalg.norm((A @ Q)[b : n - b])
    den = np.linalg.norm((B @ Q)[b : n - b])
    return float(num), float(num / den) if den > 0 else float("inf")


def intertwining_residual(eta: OperatorMatrix, H: OperatorMatrix, name: str = "intertwining") -> ResidualReport:
    """Interior Frobenius norm of ``eta H - H^H eta``."""
    if eta.entries.shape != H.entries.shape:
        raise GridError("dimension mismatch")
    _same_grid(eta, H)
    e, h = eta.entries, H.entries
    R = _interior(e @ h - h.conj().T @ e)
    ab = _fro(R)
    den = _fro(_interior(e)) * _fro(_interior(h))
    return ResidualReport(name, ab, ab / den if den > 0 else float("inf"), H.grid.n)


def hermiticity_class(O: OperatorMatrix, tol: float = 1e-8, norm: str = "frobenius") -> HermiticityReport:
    """Classify by the smaller of the relative interior defects of ``O -+ O^H``.

    ``norm="frobenius"`` compares matrices entrywise.  ``norm="probe"``
    compares their action on smooth sine modes, which is the meaningful test
    for ``U D + U'/2`` with variable ``U``: that matrix is anti-Hermitian only
    up to the truncation error of the stencil.
    """
    m = O.entries
    if norm == "frobenius":
        base = _fro(_interior(m)) or 1.0
        dh = _fro(_interior(m - m.conj().T)) / base
        da = _fro(_interior(m + m.conj().T)) / base
    elif norm == "probe":
        dh = _probe_rel(m - m.conj().T, m, O.grid)[1]
        da = _probe_rel(m + m.conj().T, m, O.grid)[1]
    else:
        raise ValueError(f"unknown norm {norm!r}")
    if min(dh, da) > tol:
        return HermiticityReport("neither", min(dh, da), dh, da)
    if dh <= da:
        return HermiticityReport("hermitian", dh, dh, da)
    return HermiticityReport("anti_hermitian", da, dh, da)


def _block(H: OperatorMatrix) -> np.ndarray:
    return H.entries[1:-1, 1:-1].toarray()


def _hermitian_band(H: OperatorMatrix, tol: float) -> Optional[np.ndarray]:
    """Lower banded storage of the Dirichlet block when it is Hermitian, else None."""
    A = H.entries[1:-1, 1:-1].tocoo()
    if A.nnz == 0:
        return None
    scale = float(np.max(np.abs(A.data)))
    D = (A - A.conj().T).tocoo()
    if D.nnz and np.max(np.abs(D.data)) > tol * scale:
        return None
    b = int(np.max(np.abs(A.row - A.col)))
    m = A.shape[0]
    band = np.zeros((b + 1, m), dtype=complex)
    low = A.row >= A.col
    band[A.row[low] - A.col[low], A.col[low]] = A.data[low]
    if not np.any(band.imag):
        band = band.real
    return band


def _pair_defect(ev: np.ndarray) -> float:
    pts = np.column_stack([ev.real, ev.imag])
    conj = np.column_stack([ev.real, -ev.imag])
    d, _ = cKDTree(conj).query(pts)
    return float(np.max(d))


def spectrum(H: OperatorMatrix, cap: int = 6000, hermitian_tol: float = 1e-13) -> SpectralReport:
    """Eigenvalues of the Dirichlet block (the ``n-2`` interior unknowns).

    Hermitian blocks go to ``eigvalsh``; others to the general solver.
    """
    if H.grid.n - 2 > cap:
        raise VerifyError(f"matrix dimension {H.grid.n - 2} exceeds cap {cap}")
    band = _hermitian_band(H, hermitian_tol)
    try:
        if band is not None:
            ev = sla.eig_banded(band, lower=True, eigvals_only=True).astype(complex)
        else:
            ev = sla.eigvals(_block(H))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise VerifyError(f"eigensolver failed: {exc}") from exc
    ev = ev[np.lexsort((ev.imag, ev.real))]
    return SpectralReport(ev, float(np.max(np.abs(ev.imag))), _pair_defect(ev))


def eigenpairs(H: OperatorMatrix, k: int) -> tuple[np.ndarray, list[SampledFunction]]:
    """Lowest ``k`` eigenpairs by real part, vectors padded with the zero ends."""
    band = _hermitian_band(H, 1e-13)
    if band is not None:
        k = min(k, H.grid.n - 2)
        w, v = sla.eig_banded(band, lower=True, select="i", select_range=(0, k - 1))
        w = w.astype(complex)
        order = np.arange(len(w))
    else:
        w, v = sla.eig(_block(H))
        order = np.lexsort((w.imag, w.real))[:k]
    g = H.grid
    vecs = []
    for j in order:
        full = np.zeros(g.n, dtype=complex)
        full[1:-1] = v[:, j]
        f = SampledFunction(g, full)
        vecs.append(f / np.sqrt(integrate(SampledFunction(g, np.abs(full) ** 2)).real))
    return w[order], vecs


def eta_orthogonality(
    psi1: SampledFunction,
    psi2: SampledFunction,
    eta: OperatorMatrix,
    E1: complex,
    E2: complex,
) -> complex:
    """``(E1 - conj(E2)) * int conj(psi2(-x)) (eta psi1)(x) dx``.

    ``psi2`` is the second field of the two-field form, so an eigenvector
    ``phi2`` of the Hamiltonian enters as ``psi2(x) = phi2(-x)``.
    """
    g = eta.grid
    if not (psi1.grid.same_as(g) and psi2.grid.same_as(g)):
        raise GridError("grid mismatch")
    flipped = parity_matrix(g) @ psi2
    dens = SampledFunction(g, np.conj(flipped.values) * (eta @ psi1).values)
    return complex((E1 - np.conj(E2)) * integrate(dens))


def evolve_conservation(
    H: OperatorMatrix,
    eta: OperatorMatrix,
    psi1_0: SampledFunction,
    psi2_0: SampledFunction,
    dt: float,
    steps: int,
) -> ContinuityRecord:
    """Crank-Nicolson evolution of both fields and the recorded invariant.

    ``psi1`` evolves under ``H``.  The reflected second field
    ``chi(x) = psi2(-x)`` also evolves under ``H``; then
    ``d/dt <chi, eta psi1> = -i <chi, (eta H - H^H eta) psi1>``, which vanishes
    whenever the intertwining holds.  The record holds
    ``int conj(psi2(-x)) (eta psi1)(x) dx`` after every step.
    """
    if not dt > 0:
        raise VerifyError("dt must be positive")
    if steps < 1:
        raise VerifyError("steps must be at least 1")
    g = H.grid
    n = g.n
    A = H.entries[1:-1, 1:-1].tocsc()
    I = sp.identity(n - 2, dtype=complex, format="csc")
    try:
        lu = spla.splu((I + 0.5j * dt * A).tocsc())
    except RuntimeError as exc:
        raise VerifyError(f"linear solve failed: {exc}") from exc
    B = (I - 0.5j * dt * A).tocsr()
    P = parity_matrix(g).entries
    psi = np.asarray(psi1_0.values, dtype=complex).copy()
    chi = P @ np.asarray(psi2_0.values, dtype=complex)
    E = eta.entries
    h = g.h

    def record():
        v = np.conj(chi) * (E @ psi)
        return h * (v.sum() - 0.5 * (v[0] + v[-1]))

    times = [0.0]
    vals = [record()]
    for k in range(1, steps + 1):
        psi[1:-1] = lu.solve(B @ psi[1:-1])
        chi[1:-1] = lu.solve(B @ chi[1:-1])
        psi[0] = psi[-1] = chi[0] = chi[-1] = 0.0
        times.append(k * dt)
        vals.append(record())
    return ContinuityRecord(np.array(times), np.array(vals))


def tau_residual(alpha: SampledFunction, H: OperatorMatrix, probes: int = 32, seed: int = 0) -> ResidualReport:
    """Random-probe check of ``tau(H v) = H^H (tau v)`` on interior rows."""
    from .operators import apply_tau

    if probes < 1:
        raise VerifyError("need at least one probe")
    rng = np.random.default_rng(seed)
    g = H.grid
    b = INTERIOR_BAND
    Hd = H.entries.conj().T
    num = den = 0.0
    for _ in range(probes):
        v = rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)
        v[0] = v[-1] = 0.0
        lhs = apply_tau(alpha, H.entries @ v)
        rhs = Hd @ apply_tau(alpha, v)
        num += float(np.sum(np.abs(lhs - rhs)[b:-b] ** 2))
        den += float(np.sum(np.abs(lhs)[b:-b] ** 2))
    ab = np.sqrt(num)
    return ResidualReport("tau", ab, ab / np.sqrt(den) if den > 0 else float("inf"), g.n, details={"probes": probes})


def _check_R(R: SampledFunction, require_positive: bool = True, exclude_one: bool = True) -> np.ndarray:
    r = np.real(np.asarray(R.values))
    if require_positive and np.any(r <= 0):
        raise VerifyError("R must be positive")
    if np.any(np.abs(r) < 1e-9):
        raise VerifyError("R vanishes on the grid")
    if exclude_one and np.any(np.abs(r - 1.0) < 1e-9):
        raise VerifyError("R touches the excluded value 1")
    return r


def _dg(v) -> sp.csr_matrix:
    return sp.diags(np.asarray(v, dtype=complex), 0, format="csr")


def _closed(g, m):
    d = np.ones(g.n)
    d[0] = d[-1] = 0
    P = sp.diags(d, 0, format="csr")
    return P @ m @ P


def factorization_residual(
    eta_plus: OperatorMatrix,
    eta_minus: OperatorMatrix,
    eta_minus_dag: OperatorMatrix,
    U: SampledFunction,
    R: SampledFunction,
) -> ResidualReport:
    """``eta+ - (eta-^H - c)(eta- - c)`` with ``c = (U/2)(ln R)'``."""
    r = _check_R(R)
    g = U.grid
    c = _closed(g, _dg(0.5 * U.values * derivative(SampledFunction(g, np.log(r))).values))
    prod = (eta_minus_dag.entries - c) @ (eta_minus.entries - c)
    diff = _interior(eta_plus.entries - prod)
    ab = _fro(diff)
    return ResidualReport("factorization", ab, ab / _fro(_interior(eta_plus.entries)), g.n)


def decomposition_residual(
    eta_plus: OperatorMatrix,
    eta_minus: OperatorMatrix,
    eta_minus_dag: OperatorMatrix,
    U: SampledFunction,
    R: SampledFunction,
) -> ResidualReport:
    """``eta+ - [eta-^H eta- + U^2 R''/(2R) + U U' R'/R - ((R-3)/(R-1)) (U R'/(2R))^2]``."""
    r = _check_R(R)
    g = U.grid
    Rs = SampledFunction(g, r)
    Rp = derivative(Rs).values.real
    Rpp = derivative(Rs, 2).values.real
    u = np.real(U.values)
    up = derivative(U).values.real
    corr = u**2 * Rpp / (2 * r) + u * up * Rp / r - (r - 3) / (r - 1) * (u * Rp / (2 * r)) ** 2
    rhs = eta_minus_dag.entries @ eta_minus.entries + _closed(g, _dg(corr))
    diff = _interior(eta_plus.entries - rhs)
    ab = _fro(diff)
    return ResidualReport("decomposition", ab, ab / _fro(_interior(eta_plus.entries)), g.n)


def similarity_residual(zeta: OperatorMatrix, eta_minus: OperatorMatrix, R: SampledFunction) -> ResidualReport:
    """``zeta - R^(1/2) eta- R^(-1/2)`` in the probe norm (see module docstring)."""
    r = _check_R(R, exclude_one=False)
    g = zeta.grid
    s = np.sqrt(r)
    sim = _closed(g, _dg(s) @ eta_minus.entries @ _dg(1.0 / s))
    A = zeta.entries - sim
    ab, rel = _probe_rel(A, zeta.entries, g)
    fro = _fro(_interior(A)) / (_fro(_interior(zeta.entries)) or 1.0)
    return ResidualReport("similarity", ab, rel, g.n, norm="probe", details={"frobenius_relative": fro})


def convergence_order(values: Sequence[float], ratio: float = 2.0) -> float:
    """Smallest observed order ``log(e_k/e_{k+1})/log(ratio)`` over a refinement sequence."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("inf")
    return float(np.min(np.log(v[:-1] / v[1:]) / np.log(ratio)))
