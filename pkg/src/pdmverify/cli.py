"""Command-line entry point.

Usage::

    pdmverify verify --config CFG [--suite NAME]... [--tol KEY=VALUE]...
                     [--out PATH] [--format json|csv|table]
    pdmverify export --config CFG --what potential|eigenfunctions|coordmap|conservation
                     [--out DIR]

Exit codes: 0 all requested suites pass, 1 at least one suite fails,
2 configuration error.

The config is one JSON document::

    {
      "model": {"U": "1", "a": "0", "G": "exp(x)", "g": "exp(x)",
                "epsilon": 0, "gamma": 0, "delta": 1, "lambda1": 1, "lambda2": 0},
      "grid": {"x_min": -4, "x_max": 4, "n": 2001},
      "suites": ["intertwine_plus", "intertwine_minus"],
      "tolerances": {"intertwine_plus": 1e-4},
      "options": {"spectrum": {"expected": [0, 2, 4, 6, 8]}},
      "output": {"format": "json", "path": null}
    }

Model values are expression strings (see :mod:`pdmverify.exprlang`).  The
optional keys ``F`` and ``f`` override the generating functions otherwise
derived from ``G`` and ``U``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .backlund import (
    BacklundError,
    b_transform,
    build_chain,
    closure_check,
    commute_check,
    constant_mass_family,
    constant_mass_pivot,
    diagram_families,
    ode_residual,
    pivot_from_samples,
    probe_indices,
    s_involution_defect,
)
from .coordmap import (
    CoordMapError,
    F_from_R,
    R_closed_form,
    R_from_F,
    build_coordinate_map,
    check_f_transform,
    invert_xi,
    map_f,
    ode_residual_4_18,
    sigma_fn,
    xi_from_R,
)
from .exprlang import ExprError, eval_expr
from .grid import Grid, GridError, SampledFunction, make_grid
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
from .operators import (
    build_eta_exp_parity,
    build_eta_minus,
    build_eta_plus,
    build_modified_H,
    build_zeta,
)
from .verify import (
    VerifyError,
    convergence_order,
    eigenpairs,
    eta_orthogonality,
    evolve_conservation,
    factorization_residual,
    decomposition_residual,
    hermiticity_class,
    intertwining_residual,
    similarity_residual,
    spectrum,
    tau_residual,
)

SUITES = (
    "hermiticity",
    "intertwine_plus",
    "intertwine_minus",
    "tau_check",
    "spectrum",
    "orthogonality",
    "conservation",
    "factorization",
    "decomposition",
    "similarity",
    "coordmap",
    "backlund_closure",
)

DEFAULT_TOLERANCES = {
    "hermiticity": 1e-8,
    "anti_hermiticity": 1e-4,
    "intertwine_plus": 1e-4,
    "intertwine_minus": 1e-4,
    "order_min": 1.5,
    "tau_check": 1e-6,
    "spectrum": 2e-3,
    "spectrum_pairing": 1e-6,
    "orthogonality": 1e-6,
    "conservation": 1e-6,
    "factorization": 1e-3,
    "decomposition": 1e-3,
    "similarity": 1e-3,
    "rs_identity": 1e-12,
    "xi_roundtrip": 1e-5,
    "f_transform": 1e-4,
    "ode": 1e-5,
    "branch_product": 1e-9,
    "lambda_constancy": 1e-6,
    "transformed_ode": 1e-4,
    "closure": 1e-5,
    "s_involution": 1e-10,
    "commute": 1e-4,
}

FORMATS = ("json", "csv", "table")
EXPORTS = ("potential", "eigenfunctions", "coordmap", "conservation")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


@dataclass
class RunConfig:
    model: ModelSpec
    grid: Grid
    suites: list
    tolerances: dict
    options: dict = field(default_factory=dict)
    output_format: str = "json"
    output_path: Optional[str] = None


# --------------------------------------------------------------------------
# Config loading
# --------------------------------------------------------------------------


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)


def parse_config(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = set(doc) - {"model", "grid", "suites", "tolerances", "options", "output"}
    if unknown:
        raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")

    m = doc.get("model")
    if not isinstance(m, dict):
        raise ConfigError("model: required object missing")
    fields = {}
    for key, val in m.items():
        if key in ("U", "a", "G", "g", "F", "f"):
            if not isinstance(val, (str, int, float)) or isinstance(val, bool):
                raise ConfigError(f"model.{key}: expected an expression string")
            fields[key] = str(val)
        elif key in ("epsilon", "gamma", "delta", "lambda1", "lambda2"):
            fields[key] = _num(val, f"model.{key}")
        else:
            raise ConfigError(f"model.{key}: unknown key")
    try:
        spec = ModelSpec.from_strings(**fields)
    except ExprError as exc:
        bad = next((k for k, v in fields.items() if isinstance(v, str) and _bad_expr(v)), "?")
        raise ConfigError(f"model.{bad}: {exc}") from exc

    gd = doc.get("grid")
    if not isinstance(gd, dict):
        raise ConfigError("grid: required object missing")
    for k in ("x_min", "x_max", "n"):
        if k not in gd:
            raise ConfigError(f"grid.{k}: required key missing")
    try:
        n = gd["n"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError(f"grid.n: expected an integer, got {n!r}")
        grid = make_grid(_num(gd["x_min"], "grid.x_min"), _num(gd["x_max"], "grid.x_max"), n)
    except GridError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    suites = doc.get("suites", [])
    if not isinstance(suites, list):
        raise ConfigError("suites: expected a list of names")
    for i, s in enumerate(suites):
        if s not in SUITES:
            raise ConfigError(f"suites[{i}]: unknown suite {s!r}; known: {', '.join(SUITES)}")

    tols = dict(DEFAULT_TOLERANCES)
    for k, v in (doc.get("tolerances") or {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{k}: unknown tolerance key")
        tols[k] = _num(v, f"tolerances.{k}")

    options = doc.get("options") or {}
    if not isinstance(options, dict):
        raise ConfigError("options: expected an object")

    out = doc.get("output") or {}
    fmt = out.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format: expected one of {FORMATS}, got {fmt!r}")

    try:
        sample_U(spec, grid)
    except (ModelError, ExprError) as exc:
        raise ConfigError(f"model.U: {exc}") from exc

    return RunConfig(spec, grid, list(suites), tols, options, fmt, out.get("path"))


def _bad_expr(src: str) -> bool:
    from .exprlang import parse_expr

    try:
        parse_expr(src)
        return False
    except ExprError:
        return True


# --------------------------------------------------------------------------
# Suites
# --------------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    passed: bool
    metrics: dict
    checks: dict
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"passed": self.passed, "metrics": _clean(self.metrics), "checks": _clean(self.checks)}
        if self.error:
            d["error"] = self.error
        return d


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(float(np.real(obj))), "im": _clean(float(np.imag(obj)))}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


class _Ctx:
    """Lazily computed shared data for one config."""

    def __init__(self, cfg: RunConfig, grid: Optional[Grid] = None):
        self.cfg = cfg
        self.spec = cfg.model
        self.g = grid or cfg.grid
        self._cache = {}

    def get(self, key: str, fn: Callable):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def U(self):
        return self.get("U", lambda: sample_U(self.spec, self.g))

    @property
    def a(self):
        return self.get("a", lambda: sample(self.spec.a_expr, self.g))

    @property
    def G(self):
        return self.get("G", lambda: sample(self.spec.G_expr, self.g))

    @property
    def gfn(self):
        return self.get("g", lambda: sample(self.spec.g_expr, self.g))

    @property
    def F(self):
        return self.get("F", lambda: resolve_F(self.spec, self.g))

    @property
    def f(self):
        return self.get("f", lambda: f_from_U(self.spec, self.g))

    @property
    def V_plus(self):
        return self.get("Vp", lambda: potential_V_plus(self.F, self.G, self.U, self.spec.epsilon))

    @property
    def V_minus(self):
        return self.get("Vm", lambda: potential_V_minus(self.f, self.gfn, self.U, self.spec.gamma))

    @property
    def eta_plus(self):
        return self.get("eta_plus", lambda: build_eta_plus(self.U, self.F, self.G, self.a))

    @property
    def eta_minus(self):
        return self.get("eta_minus", lambda: build_eta_minus(self.U, self.f, self.gfn, self.a)[0])

    def H(self, side: str = "plus", form: str = "factored"):
        V = self.V_plus if side == "plus" else self.V_minus
        return self.get(f"H_{side}_{form}", lambda: build_modified_H(self.U, self.a, V, form=form))

    def opt(self, suite: str) -> dict:
        o = self.cfg.options.get(suite, {})
        if not isinstance(o, dict):
            raise ConfigError(f"options.{suite}: expected an object")
        return o


def _refined_grids(g: Grid) -> list:
    return [g, make_grid(g.x_min, g.x_max, 2 * g.n - 1), make_grid(g.x_min, g.x_max, 4 * g.n - 3)]


def _suite_hermiticity(ctx: _Ctx, tol: dict) -> SuiteResult:
    t = tol["hermiticity"]
    ep = hermiticity_class(ctx.eta_plus, t)
    em = hermiticity_class(ctx.eta_minus, tol["anti_hermiticity"], norm="probe")
    h = hermiticity_class(ctx.H("plus", "expanded"), t)
    checks = {"eta_plus_hermitian": ep.kind == "hermitian", "eta_minus_anti_hermitian": em.kind == "anti_hermitian"}
    metrics = {
        "eta_plus": {"class": ep.kind, "defect": ep.defect},
        "eta_minus": {"class": em.kind, "defect": em.defect},
        "H": {"class": h.kind, "hermitian_defect": h.hermitian_defect},
    }
    return SuiteResult("hermiticity", all(checks.values()), metrics, checks)


def _suite_intertwine(side: str):
    def run(ctx: _Ctx, tol: dict) -> SuiteResult:
        name = f"intertwine_{side}"
        rep = intertwining_residual(ctx.eta_plus if side == "plus" else ctx.eta_minus, ctx.H(side), name)
        metrics = {"relative": rep.relative, "absolute": rep.absolute, "n": rep.grid_n}
        checks = {"relative_below_tol": rep.relative < tol[name]}
        if ctx.opt("intertwine").get("refine", False):
            rels = [rep.relative]
            for g in _refined_grids(ctx.g)[1:]:
                c = _Ctx(ctx.cfg, g)
                e = c.eta_plus if side == "plus" else c.eta_minus
                rels.append(intertwining_residual(e, c.H(side)).relative)
            order = convergence_order(rels)
            metrics["refinement"] = {"relative": rels, "order": order}
            checks["order_at_least_min"] = order >= tol["order_min"]
        return SuiteResult(name, all(checks.values()), metrics, checks)

    return run


def _alpha(ctx: _Ctx) -> SampledFunction:
    return ctx.get("alpha", lambda: gauge_phase_alpha(ctx.spec, ctx.g))


def _suite_tau(ctx: _Ctx, tol: dict) -> SuiteResult:
    o = ctx.opt("tau_check")
    rep = tau_residual(_alpha(ctx), ctx.H("plus", "expanded"), probes=int(o.get("probes", 32)), seed=int(o.get("seed", 0)))
    checks = {"relative_below_tol": rep.relative < tol["tau_check"]}
    return SuiteResult("tau_check", all(checks.values()), {"relative": rep.relative, "probes": rep.details["probes"]}, checks)


def _suite_spectrum(ctx: _Ctx, tol: dict) -> SuiteResult:
    o = ctx.opt("spectrum")
    rep = spectrum(ctx.H("plus", "expanded"))
    k = int(o.get("report", 10))
    metrics = {
        "lowest": [complex(v) for v in rep.lowest(k)],
        "reality_max_imag": rep.reality_max_imag,
        "conjugate_pair_defect": rep.conjugate_pair_defect,
    }
    checks = {}
    if "expected" in o:
        exp = np.asarray(o["expected"], dtype=float)
        got = rep.eigenvalues[: len(exp)]
        err = float(np.max(np.abs(got - exp)))
        metrics["expected_max_error"] = err
        checks["expected_within_tol"] = err < tol["spectrum"]
    if o.get("check_pairing", False):
        checks["pairing_below_tol"] = rep.conjugate_pair_defect < tol["spectrum_pairing"]
    return SuiteResult("spectrum", all(checks.values()), metrics, checks)


def _suite_orthogonality(ctx: _Ctx, tol: dict) -> SuiteResult:
    o = ctx.opt("orthogonality")
    k = int(o.get("states", 4))
    which = o.get("eta", "exp_parity")
    if which == "identity":
        from .grid import OperatorMatrix

        eta = OperatorMatrix.diag(np.ones(ctx.g.n), ctx.g)
    elif which == "exp_parity":
        eta = build_eta_exp_parity(_alpha(ctx), ctx.g)
    else:
        raise ConfigError(f"options.orthogonality.eta: unknown value {which!r}")
    from .grid import parity_matrix

    E, vecs = eigenpairs(ctx.H("plus", "expanded"), k)
    P = parity_matrix(ctx.g)
    worst = 0.0
    pairs = 0
    for i in range(k):
        for j in range(k):
            if abs(E[i] - np.conj(E[j])) <= 1e-6:
                continue
            val = eta_orthogonality(vecs[i], P @ vecs[j], eta, E[i], E[j])
            worst = max(worst, abs(val))
            pairs += 1
    checks = {"max_below_tol": worst < tol["orthogonality"]}
    return SuiteResult("orthogonality", all(checks.values()), {"max_abs": worst, "pairs": pairs, "eta": which}, checks)


def _packet(g: Grid, o: dict) -> SampledFunction:
    c = float(o.get("center", 0.0))
    w = float(o.get("width", 0.5))
    k = float(o.get("momentum", 0.0))
    x = g.points
    v = np.exp(-((x - c) ** 2) / (2 * w**2) + 1j * k * x)
    v[0] = v[-1] = 0.0
    return SampledFunction(g, v / np.sqrt(np.sum(np.abs(v) ** 2) * g.h))


def _suite_conservation(ctx: _Ctx, tol: dict) -> SuiteResult:
    o = ctx.opt("conservation")
    psi1 = _packet(ctx.g, o.get("psi1", {}))
    psi2 = _packet(ctx.g, o.get("psi2", o.get("psi1", {})))
    rec = evolve_conservation(ctx.H("plus"), ctx.eta_plus, psi1, psi2, float(o.get("dt", 1e-3)), int(o.get("steps", 1000)))
    drift = rec.relative_drift
    checks = {"drift_below_tol": drift < tol["conservation"]}
    return SuiteResult("conservation", all(checks.values()), {"relative_drift": drift, "initial": complex(rec.rho_eta_integral[0])}, checks)


def _pipeline(ctx: _Ctx):
    def build():
        R = R_from_F(ctx.F, ctx.U, ctx.spec.delta)
        f = map_f(ctx.F, ctx.U, R).f
        em, emd = build_eta_minus(ctx.U, f, ctx.gfn, ctx.a, check_f=False)
        Z, _ = build_zeta(ctx.U, ctx.F, ctx.gfn, ctx.a)
        ep = build_eta_plus(ctx.U, ctx.F, ctx.gfn, ctx.a)
        return R, em, emd, Z, ep

    return ctx.get("pipeline", build)


def _suite_identity(name: str):
    def run(ctx: _Ctx, tol: dict) -> SuiteResult:
        R, em, emd, Z, ep = _pipeline(ctx)
        if name == "factorization":
            rep = factorization_residual(ep, em, emd, ctx.U, R)
        elif name == "decomposition":
            rep = decomposition_residual(ep, em, emd, ctx.U, R)
        else:
            rep = similarity_residual(Z, em, R)
        checks = {"relative_below_tol": rep.relative < tol[name]}
        return SuiteResult(name, all(checks.values()), {"relative": rep.relative, "norm": rep.norm, **rep.details}, checks)

    return run


def _suite_coordmap(ctx: _Ctx, tol: dict) -> SuiteResult:
    o = ctx.opt("coordmap")
    mode = o.get("mode", "pipeline")
    metrics, checks = {}, {}
    if mode == "pipeline":
        R = R_from_F(ctx.F, ctx.U, ctx.spec.delta)
        cm = build_coordinate_map(ctx.U, R, ctx.G, ctx.spec.lambda1, ctx.spec.lambda2)
        rs = float(np.max(np.abs(cm.R.values * cm.S.values - 1.0)))
        xi = cm.xi
        probes = np.linspace(xi.values.real[2], xi.values.real[-3], 200)
        back = invert_xi(xi, probes)
        again = np.interp(back, ctx.g.points, xi.values.real)
        roundtrip = float(np.max(np.abs(again - probes)))
        F_back = F_from_R(R, ctx.U)
        f_back_err = float(np.max(np.abs((F_back - ctx.F).values)[2:-2]))
        fm = map_f(ctx.F, ctx.U, R)
        ft = check_f_transform(ctx.U, ctx.F, R)
        metrics.update(rs_identity=rs, xi_roundtrip=roundtrip, F_reconstruction=f_back_err, map_f_gap=fm.gap, f_transform=ft.absolute)
        checks.update(
            rs_identity=rs < tol["rs_identity"],
            xi_roundtrip=roundtrip < tol["xi_roundtrip"],
            f_transform=ft.absolute < tol["f_transform"],
        )
    elif mode == "closed_form":
        branch = o.get("branch", "plus")
        margin = float(o.get("margin", 0.25))
        U_fn = lambda t: eval_expr(ctx.spec.U_expr, t)
        sig = sigma_fn(ctx.U, ctx.spec.lambda1, ctx.spec.lambda2, 0.0, U_fn)
        R = R_closed_form(sig, branch, margin)
        other = R_closed_form(sig, "minus" if branch == "plus" else "plus", margin)
        prod = float(np.max(np.abs(R.values * other.values - 1.0)))
        ode = ode_residual_4_18(R, ctx.U)
        xi = xi_from_R(R)
        mono = bool(np.all(np.diff(xi.values.real) > 0))
        metrics.update(branch=branch, ode=ode.absolute, branch_product=prod, xi_monotone=mono)
        checks.update(ode=ode.absolute < tol["ode"], branch_product=prod < tol["branch_product"], xi_monotone=mono)
    else:
        raise ConfigError(f"options.coordmap.mode: unknown value {mode!r}")
    return SuiteResult("coordmap", all(checks.values()), metrics, checks)


def _suite_backlund(ctx: _Ctx, tol: dict) -> SuiteResult:
    o = ctx.opt("backlund")
    branch = o.get("branch", "minus")
    lambdas = tuple(float(v) for v in o.get("lambdas", (1.0, 1.0, 1.0)))
    fam = constant_mass_family()
    if o.get("pivot", "closed_form") == "closed_form":
        piv = constant_mass_pivot(ctx.g, branch)
    else:
        U_fn = lambda t: eval_expr(ctx.spec.U_expr, t)
        sig = sigma_fn(ctx.U, ctx.spec.lambda1, ctx.spec.lambda2, 0.0, U_fn)
        piv = pivot_from_samples(R_closed_form(sig, branch))
    first = b_transform(fam, piv, lambdas[0])
    stage1 = ode_residual(first.family, first.pivot)
    chain = build_chain(fam, piv, lambdas)
    clo = closure_check(chain)
    s2 = s_involution_defect(fam, piv.Rp[probe_indices(piv.s.n)])
    com = commute_check(fam, piv, lambdas[0])
    dia = diagram_families(fam, piv, lambdas)
    metrics = {
        "branch": branch,
        "lambda_defect": first.lambda_defect,
        "transformed_ode_relative": stage1.relative,
        "closure": clo.details,
        "s_involution": s2,
        "commute": com.absolute,
        "diagram": dia.to_dict(),
        "chain": chain.to_dict(),
    }
    checks = {
        "lambda_constancy": first.lambda_defect < tol["lambda_constancy"],
        "transformed_ode": stage1.relative < tol["transformed_ode"],
        "closure_identities": clo.absolute < tol["closure"],
        "s_involution": s2 < tol["s_involution"],
        "commute": com.absolute < tol["commute"],
        "diagram_six_and_closes": dia.n_distinct == 6 and dia.closes,
    }
    return SuiteResult("backlund_closure", all(checks.values()), metrics, checks)


_RUNNERS = {
    "hermiticity": _suite_hermiticity,
    "intertwine_plus": _suite_intertwine("plus"),
    "intertwine_minus": _suite_intertwine("minus"),
    "tau_check": _suite_tau,
    "spectrum": _suite_spectrum,
    "orthogonality": _suite_orthogonality,
    "conservation": _suite_conservation,
    "factorization": _suite_identity("factorization"),
    "decomposition": _suite_identity("decomposition"),
    "similarity": _suite_identity("similarity"),
    "coordmap": _suite_coordmap,
    "backlund_closure": _suite_backlund,
}


def run_suites(cfg: RunConfig) -> dict:
    """Run every requested suite; returns the report body (no metadata)."""
    ctx = _Ctx(cfg)
    results = {}
    for name in sorted(set(cfg.suites)):
        try:
            res = _RUNNERS[name](ctx, cfg.tolerances)
        except ConfigError:
            raise
        except (ModelError, GridError, VerifyError, CoordMapError, BacklundError, ExprError) as exc:
            res = SuiteResult(name, False, {}, {}, error=f"{type(exc).__name__}: {exc}")
        results[name] = res
    return {
        # run metadata kept apart from results; no clocks or hostnames
        "meta": {"tool": "pdmverify", "version": __version__},
        "grid": {"x_min": cfg.grid.x_min, "x_max": cfg.grid.x_max, "n": cfg.grid.n},
        "model": cfg.model.to_mapping(),
        "passed": all(r.passed for r in results.values()),
        "suites": {k: v.to_dict() for k, v in results.items()},
        "tolerances": {k: cfg.tolerances[k] for k in sorted(cfg.tolerances)},
    }


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def _flatten(prefix: str, obj, out: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def render(report: dict, fmt: str) -> str:
    body = _clean(report)
    if fmt == "json":
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "key", "value"])
        for name, res in body["suites"].items():
            rows: list = []
            _flatten("", res, rows)
            for k, v in rows:
                w.writerow([name, k, v])
        return buf.getvalue()
    lines = [f"{'suite':<18} {'result':<6} detail"]
    for name, res in body["suites"].items():
        status = "PASS" if res["passed"] else "FAIL"
        if "error" in res:
            detail = res["error"]
        else:
            detail = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in res["checks"].items()) or "report only"
        lines.append(f"{name:<18} {status:<6} {detail}")
    lines.append(f"overall: {'PASS' if body['passed'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------


def _write_rows(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def export_plotdata(cfg: RunConfig, what: str, out_dir: str = ".") -> list:
    """Write ``<what>.csv`` into ``out_dir``; returns the written paths."""
    if what not in EXPORTS:
        raise ConfigError(f"--what: unknown export {what!r}; known: {', '.join(EXPORTS)}")
    ctx = _Ctx(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{what}.csv"
    x = ctx.g.points
    if what == "potential":
        V = ctx.V_plus.values
        _write_rows(path, ["x", "ReV", "ImV"], zip(x, V.real, V.imag))
    elif what == "eigenfunctions":
        k = int(ctx.opt("export").get("states", 4))
        E, vecs = eigenpairs(ctx.H("plus", "expanded"), k)
        header = ["x"]
        cols = [x]
        for i, v in enumerate(vecs):
            header += [f"re_{i}", f"im_{i}"]
            cols += [v.values.real, v.values.imag]
        _write_rows(path, header, zip(*cols))
    elif what == "coordmap":
        R = R_from_F(ctx.F, ctx.U, ctx.spec.delta)
        build_coordinate_map(ctx.U, R, ctx.G, ctx.spec.lambda1, ctx.spec.lambda2).to_csv(path)
    else:
        o = ctx.opt("conservation")
        psi = _packet(ctx.g, o.get("psi1", {}))
        rec = evolve_conservation(ctx.H("plus"), ctx.eta_plus, psi, _packet(ctx.g, o.get("psi2", o.get("psi1", {}))),
                                  float(o.get("dt", 1e-3)), int(o.get("steps", 1000)))
        I = rec.rho_eta_integral
        drift = np.abs(I - I[0]) / abs(I[0])
        _write_rows(path, ["t", "re", "im", "rel_drift"], zip(rec.times, I.real, I.imag, drift))
    return [str(path)]


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdmverify", description="Verify pseudo-Hermitian PDM operator identities.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--config", required=True)
    v.add_argument("--suite", action="append", default=None, help="suite name (repeatable); overrides the config list")
    v.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE")
    v.add_argument("--out", default=None, help="report path (default: config output.path or stdout)")
    v.add_argument("--format", choices=FORMATS, default=None)
    e = sub.add_parser("export", help="write CSV plot data")
    e.add_argument("--config", required=True)
    e.add_argument("--what", required=True)
    e.add_argument("--out", default=".", help="output directory")
    return p


def _apply_overrides(cfg: RunConfig, args) -> None:
    if args.suite:
        for s in args.suite:
            if s not in SUITES:
                raise ConfigError(f"--suite: unknown suite {s!r}; known: {', '.join(SUITES)}")
        cfg.suites = list(args.suite)
    for item in args.tol:
        key, sep, val = item.partition("=")
        if not sep or key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tol: expected KEY=VALUE with a known key, got {item!r}")
        try:
            cfg.tolerances[key] = float(val)
        except ValueError:
            raise ConfigError(f"--tol {key}: not a number: {val!r}") from None
    if args.format:
        cfg.output_format = args.format
    if args.out:
        cfg.output_path = args.out


def main(argv: Optional[list] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "export":
            for p in export_plotdata(cfg, args.what, args.out):
                print(p)
            return 0
        _apply_overrides(cfg, args)
        if not cfg.suites:
            raise ConfigError("suites: no suite requested")
        report = run_suites(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text = render(report, cfg.output_format)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.output_format != "table" and cfg.output_path:
        sys.stderr.write(render(report, "table"))
    return 0 if report["passed"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


def main_exit() -> None:
    """Console-script wrapper."""
    sys.exit(main())
