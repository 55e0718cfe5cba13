"""Numerical verification of pseudo-Hermitian position-dependent-mass operators.

Modules
-------
exprlang    expression language for model inputs
grid        uniform grids, sampled functions, sparse operator matrices
model       model specification and derived potentials
operators   Hamiltonians, intertwiners, symmetry operators
verify      residuals, spectra, orthogonality, conservation
coordmap    coordinate transformation to constant-mass form
backlund    S and B transforms of the reduced ODE family
cli         configuration-driven entry point
"""

__version__ = "0.1.0"

from .exprlang import ExprDomainError, ExprError, ExprSyntaxError, UnknownIdentifierError, eval_expr, parse_expr, to_source
from .grid import Grid, GridError, OperatorMatrix, SampledFunction, make_grid
from .model import ModelError, ModelSpec
from .scenarios import SCENARIOS, scenario

__all__ = [
    "__version__",
    "ExprDomainError",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "eval_expr",
    "parse_expr",
    "to_source",
    "Grid",
    "GridError",
    "OperatorMatrix",
    "SampledFunction",
    "make_grid",
    "ModelError",
    "ModelSpec",
    "SCENARIOS",
    "scenario",
]
