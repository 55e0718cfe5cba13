"""Named scenarios used by the tests, the acceptance suite and the configs."""

from __future__ import annotations

from .model import ModelSpec

__all__ = ["SCENARIOS", "scenario"]

SCENARIOS = {
    # constant mass, constant G: Hermitian counterpart, F = 0
    "M0": dict(U="1", a="0", G="1", g="0"),
    # constant mass, G = exp(x): F = -1/2, complex V+
    "M1": dict(U="1", a="0", G="exp(x)", g="exp(x)"),
    # position-dependent mass U = 1 + x^2 with constant G: F = x
    "PDM": dict(U="1 + x^2", a="0", G="1", g="0"),
    # supersymmetric oscillator V = x^2 - 1
    "oscillator": dict(U="1", a="0", G="0", F="x", g="0"),
    # even real vector potential, real V+
    "gauge": dict(U="1", a="exp(-x^2)", G="1", g="0"),
}


def scenario(name: str, **overrides) -> ModelSpec:
    """ModelSpec of a named scenario; keyword overrides replace fields."""
    d = dict(SCENARIOS[name])
    d.update(overrides)
    return ModelSpec.from_strings(**d)
