"""fockbench run <config.json> [--suite S] [--seed n] [--out dir]

Runs identity checks for a Jacobi field, its image family J_K and the
associated measures, and writes report.json plus per-suite CSV tables.
Exit codes: 0 all checks pass, 1 some check failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import ast
import copy
import csv
import datetime as _dt
import json
import math
import operator
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, fock
from .chaos import chaos_basis, fourier_images, leakage, monomial_gram, parseval_gram
from .errors import FockbenchError, GramError, SingularEmbeddingError
from .fields import FieldSpec, assemble_operator, gaussian_field, poisson_field, power_moments, validate_field
from .measures import (
    MeasureModel,
    charfun_closed,
    empirical_charfun,
    empirical_covariance,
    empirical_moments,
    gaussian_moment,
    linear_moments,
    poisson_central_moment,
    pushforward,
    sample,
)
from .spectral import DualPolynomial, eigenvector, eigenvector_residual, regularity_operators
from .transport import (
    Embedding,
    big_k,
    construction_gap,
    conjugated_field,
    jk_commutator_norm,
    jk_matrix,
    jk_power_moments,
    q_eigenvector,
    q_eigenvector_residual,
)

PRESETS = ("gauss-free", "poisson-grid", "poisson-gausskernel", "poisson-derivative", "custom")
SUITES = ("validate", "moments", "charfun", "transport", "chaos", "eigencheck")

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["preset"],
    "properties": {
        "preset": {"enum": list(PRESETS)},
        "field": {"enum": ["gaussian", "poisson"]},
        "d": {"type": "integer", "minimum": 1, "maximum": 64},
        "cutoff": {"type": "integer", "minimum": 1, "maximum": 12},
        "weights": {"type": "array", "items": _pos, "minItems": 1},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L", "points"],
            "properties": {"L": _pos, "points": {"type": "integer", "minimum": 2, "maximum": 64}},
        },
        "K": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["identity", "matrix", "diag", "diag_expr", "derivative"]},
                "value": {"type": "array"},
                "expr": {"type": "string"},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "tolerances": {"type": "object", "additionalProperties": _nonneg},
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "random_vectors": {"type": "integer", "minimum": 1},
                "charfun_vectors": {"type": "integer", "minimum": 1},
                "moment_order": {"type": "integer", "minimum": 1},
                "mc_moment_order": {"type": "integer", "minimum": 1, "maximum": 8},
                "chaos_degree": {"type": "integer", "minimum": 0, "maximum": 6},
                "eigen_cutoff": {"type": "integer", "minimum": 1},
                "eigen_points": {"type": "integer", "minimum": 1},
                "frame": {"enum": ["standard", "orthonormal"]},
            },
        },
        "suites": {"type": "array", "items": {"enum": list(SUITES) + ["all"]}, "minItems": 1},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "format": {"enum": ["json", "csv"]}},
        },
    },
}

DEFAULTS = {
    "cutoff": 6,
    "suites": ["all"],
    "mc": {"samples": 1_000_000, "seed": 0, "workers": 1},
    "tolerances": {
        "moment": 1e-10,
        "transport": 1e-9,
        "construction": 1e-10,
        "exact": 0.0,
        "closed_form": 1e-14,
        "n_se": 5.0,
        "commutator": 1e-12,
        "linearity": 1e-10,
        "regularity": 1e-10,
        "parseval": 1e-9,
        "chaos": 1e-8,
        "eigen": 1e-8,
        "isometry": 1e-9,
    },
    "checks": {
        "random_vectors": 20,
        "charfun_vectors": 50,
        "moment_order": 8,
        "mc_moment_order": 4,
        "chaos_degree": 4,
        "eigen_cutoff": 5,
        "eigen_points": 10,
        "frame": "orthonormal",
    },
    "output": {"path": "fockbench-out", "format": "csv"},
}


class ConfigError(FockbenchError):
    pass


# -- embeddings ---------------------------------------------------------------

def build_derivative_embedding(grid) -> Embedding:
    """K = diag(exp(-x^2/2)) D with D the forward difference, f_{d+1} := 0."""
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("derivative embedding needs a grid with at least 2 points")
    h = np.diff(x)
    if np.any(h <= 0) or not np.allclose(h, h[0], rtol=1e-9):
        raise ValueError("derivative embedding needs a strictly increasing uniform grid")
    d = x.size
    D = (np.eye(d, k=1) - np.eye(d)) / h[0]
    return Embedding(np.diag(np.exp(-x ** 2 / 2)) @ D)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"exp": np.exp, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos, "abs": np.abs, "log": np.log, "cosh": np.cosh, "tanh": np.tanh}


def eval_diag_expr(expr: str, x: np.ndarray) -> np.ndarray:
    """Evaluate an arithmetic expression in ``x`` (and pi) without eval()."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id == "pi":
                return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported element in diag expression: {ast.dump(node)[:60]}")

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse diag expression {expr!r}") from exc
    return np.broadcast_to(np.asarray(ev(tree), dtype=float), x.shape).copy()


# -- configuration ------------------------------------------------------------

@dataclass
class Experiment:
    config: dict
    spec: FieldSpec
    emb: Embedding
    model: MeasureModel
    grid: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.spec.dim

    @property
    def N(self) -> int:
        return self.config["cutoff"]

    @property
    def tol(self) -> dict:
        return self.config["tolerances"]

    @property
    def checks(self) -> dict:
        return self.config["checks"]

    @property
    def trivial_k(self) -> bool:
        return bool(np.array_equal(self.emb.K, np.eye(self.d)))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def _build_k(kspec: dict, d: int, grid) -> np.ndarray:
    kind = kspec["type"]
    if kind == "identity":
        return np.eye(d)
    if kind == "matrix":
        K = np.asarray(kspec.get("value"), dtype=float)
        if K.shape != (d, d):
            raise ConfigError(f"K matrix has shape {K.shape}, expected ({d}, {d})")
        return K
    if kind == "diag":
        v = np.asarray(kspec.get("value"), dtype=float)
        if v.shape != (d,):
            raise ConfigError(f"K diagonal has {v.size} entries, expected {d}")
        return np.diag(v)
    if grid is None:
        raise ConfigError(f"K type {kind!r} needs a grid")
    if kind == "diag_expr":
        if "expr" not in kspec:
            raise ConfigError("diag_expr needs an 'expr' field")
        return np.diag(eval_diag_expr(kspec["expr"], grid))
    return build_derivative_embedding(grid).K


def load_config(source, overrides: dict | None = None) -> Experiment:
    """Parse, validate and instantiate a configuration (path, JSON text or dict)."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {where}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = _merge(cfg, overrides)

    preset = cfg["preset"]
    grid = None
    if preset in ("poisson-grid", "poisson-gausskernel", "poisson-derivative") or "grid" in cfg:
        g = cfg.get("grid")
        if g is None:
            raise ConfigError(f"preset {preset!r} needs a grid {{L, points}}")
        grid = np.linspace(-g["L"], g["L"], g["points"])
        if "d" in cfg and cfg["d"] != g["points"]:
            raise ConfigError(f"d = {cfg['d']} disagrees with grid points = {g['points']}")
        cfg["d"] = g["points"]
    if "d" not in cfg:
        raise ConfigError(f"preset {preset!r} needs 'd'")
    d = cfg["d"]

    kind = {"gauss-free": "gaussian", "custom": cfg.get("field")}.get(preset, "poisson")
    if kind is None:
        raise ConfigError("custom preset needs 'field'")
    weights = None
    if kind == "poisson":
        if "weights" in cfg:
            weights = np.asarray(cfg["weights"], dtype=float)
            if weights.shape != (d,):
                raise ConfigError(f"{weights.size} weights for d = {d}")
        elif grid is not None:
            weights = np.full(d, grid[1] - grid[0])  # intensity dx on the grid
        else:
            weights = np.ones(d)

    kspec = cfg.get("K") or {
        "poisson-gausskernel": {"type": "diag_expr", "expr": "exp(-x**2)"},
        "poisson-derivative": {"type": "derivative"},
    }.get(preset, {"type": "identity"})
    cfg["K"] = kspec
    try:
        K = _build_k(kspec, d, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    s = np.linalg.svd(K, compute_uv=False)
    try:
        emb = Embedding(K)
    except SingularEmbeddingError as exc:
        raise ConfigError(str(exc)) from exc

    spec = gaussian_field(d) if kind == "gaussian" else poisson_field(d, weights)
    mc = cfg["mc"]
    model = MeasureModel(kind, d, None if weights is None else tuple(weights), int(mc["seed"]))
    info = {
        "field": kind,
        "d": d,
        "singular_values": s.tolist(),
        "smallest_singular_value": float(s[-1]),
        "condition_number": float(s[0] / s[-1]),
    }
    if grid is not None:
        info["grid"] = grid.tolist()
    if weights is not None:
        info["weights"] = weights.tolist()
    return Experiment(cfg, spec, emb, model, grid, info)


# -- records ------------------------------------------------------------------

def _num_out(v):
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        return [v.real, v.imag]
    return None if v is None else float(v)


class Table:
    def __init__(self):
        self.records = []
        self.info = {}

    def add(self, identity: str, lhs, rhs, tol, err=None, rel_to=None):
        """Record |lhs - rhs| <= tol (times max(1, |rel_to|) if given)."""
        err = abs(lhs - rhs) if err is None else err
        bound = tol * max(1.0, abs(rel_to)) if rel_to is not None else tol
        ok = bool(np.isfinite(err) and err <= bound)
        self.records.append(
            {"identity": identity, "lhs": _num_out(lhs), "rhs": _num_out(rhs), "abs_err": float(err), "tol": float(bound), "pass": ok}
        )

    def add_bound(self, identity: str, value, tol):
        """Record value <= tol (residual-type checks; rhs is 0)."""
        self.add(identity, float(value), 0.0, tol, err=float(value))


def _random_vectors(rng, count, d):
    return rng.normal(size=(count, d)) / math.sqrt(d)


def _rng(exp: Experiment, suite: str):
    return np.random.default_rng([exp.model.seed, SUITES.index(suite)])


def _oracle_moment(exp: Experiment, n: int, i: int) -> float:
    if exp.model.kind == "gaussian":
        return gaussian_moment(n)
    w = exp.model.weights[i]
    return poisson_central_moment(n, w) / w ** (n / 2)


def _batch(exp: Experiment, cache: dict):
    if "rho" not in cache:
        mc = exp.config["mc"]
        cache["rho"] = sample(exp.model, mc["samples"], stream=0, workers=mc["workers"])
    return cache["rho"]


# -- suites -------------------------------------------------------------------

def suite_validate(exp: Experiment, cache) -> Table:
    t = Table()
    N, tol = exp.N, exp.tol
    rep = validate_field(exp.spec, N, tolerance=tol["commutator"], seed=exp.model.seed)
    t.add_bound("field reality/symmetry", max(rep.reality["max_imag"], rep.reality["max_asymmetry"]), tol["commutator"])
    if rep.commutator_norms:
        t.add_bound(f"field commutator max over {len(rep.commutator_norms)} pairs", max(rep.commutator_norms), tol["commutator"])
    t.add_bound("field linearity", max(rep.linearity_residuals.values()), tol["linearity"])
    regs = regularity_operators(exp.spec, N)
    for n, reg in enumerate(regs[: min(N, 8) + 1]):
        dev = float(np.abs(reg.top - math.sqrt(math.factorial(n)) * np.eye(reg.top.shape[0])).max())
        t.add_bound(f"V_{{{n},{n}}} = sqrt({n}!) Id", dev, tol["regularity"])
    t.info["block_norms"] = rep.block_norms
    t.info["vnn_condition"] = {str(k): v for k, v in rep.vnn_condition.items()}
    t.info["v_operator_norms"] = [float(np.linalg.norm(r.matrix, 2)) for r in regs]
    if not exp.trivial_k:
        conj = conjugated_field(exp.spec, exp.emb)
        crep = validate_field(conj, N, tolerance=tol["commutator"], seed=exp.model.seed)
        scale = max(1.0, float(exp.emb.singular_values[0]) ** 2)
        t.add_bound("J_K reality/symmetry", max(crep.reality["max_imag"], crep.reality["max_asymmetry"]), tol["commutator"])
        if crep.commutator_norms:
            t.add_bound("J_K commutator max", max(crep.commutator_norms), tol["commutator"] * scale)
        t.add_bound("J_K linearity", max(crep.linearity_residuals.values()), tol["linearity"] * scale)
        # reported only: no regularity claim is made for J_K
        t.info["conjugated_vnn_condition"] = {str(k): v for k, v in crep.vnn_condition.items()}
    return t


def suite_moments(exp: Experiment, cache) -> Table:
    t = Table()
    d, N, tol, ch = exp.d, exp.N, exp.tol, exp.checks
    rng = _rng(exp, "moments")
    for i, e in enumerate(np.eye(d)):
        ops = power_moments(exp.spec, e, N)
        for n in range(1, N + 1):
            ref = _oracle_moment(exp, n, i)
            t.add(f"<J(e{i + 1})^{n} Omega, Omega>", float(ops[n]), ref, tol["moment"], rel_to=ref)
    for k, phi in enumerate(_random_vectors(rng, ch["random_vectors"], d)):
        ops = power_moments(exp.spec, phi, N)
        ref = linear_moments(exp.model, phi, N)
        for n in range(1, N + 1):
            t.add(f"<J(phi{k})^{n} Omega, Omega> vs cumulants", float(ops[n]), ref[n], tol["moment"], rel_to=ref[n])
    if exp.config["mc"]["samples"] >= 2:
        batch = _batch(exp, cache)
        order = min(ch["mc_moment_order"], N)
        phis = _random_vectors(rng, 10, d)
        est = empirical_moments(batch, phis, order)
        for k, phi in enumerate(phis):
            ops = power_moments(exp.spec, phi, order)
            for n in range(1, order + 1):
                e = est[k][n - 1]
                t.add(f"MC int <xi, phi{k}>^{n} d rho", e.value, float(ops[n]), exp.tol["n_se"] * e.stderr)
        img = pushforward(exp.emb, batch)
        est = empirical_moments(img, phis, order)
        for k, f in enumerate(phis):
            ops = jk_power_moments(exp.spec, exp.emb, f, order, frame=ch["frame"])
            for n in range(1, order + 1):
                e = est[k][n - 1]
                t.add(f"MC int <omega, f{k}>^{n} d rho_K", e.value, float(ops[n]), exp.tol["n_se"] * e.stderr)
    return t


def suite_charfun(exp: Experiment, cache) -> Table:
    t = Table()
    d, tol, ch = exp.d, exp.tol, exp.checks
    rng = _rng(exp, "charfun")
    K = exp.emb.K
    fs = _random_vectors(rng, ch["charfun_vectors"], d)
    for k, f in enumerate(fs):
        lhs = charfun_closed(exp.model, f, exp.emb)
        t.add(f"closed rho_K^(f{k}) = rho^(K f{k})", lhs, charfun_closed(exp.model, K @ f), tol["exact"])
        if exp.model.kind == "gaussian":
            ref = math.exp(-0.5 * float(f @ exp.emb.gram_T @ f))
            t.add(f"gaussian rho_K^(f{k}) = exp(-<K^+K f, f>/2)", lhs, ref, tol["closed_form"], rel_to=ref)
    if exp.config["mc"]["samples"] >= 2:
        img = pushforward(exp.emb, _batch(exp, cache))
        for k, f in enumerate(fs):
            e = empirical_charfun(img, f)
            t.add(f"MC rho_K^(f{k})", e.value, charfun_closed(exp.model, K @ f), tol["n_se"] * e.stderr)
        if exp.model.kind == "gaussian":
            cov, se = empirical_covariance(img)
            G = exp.emb.gram_T
            for i in range(d):
                for j in range(i, d):
                    t.add(f"MC cov(omega_{i + 1}, omega_{j + 1}) = (K^T K)_{i + 1}{j + 1}", float(cov[i, j]), float(G[i, j]), tol["n_se"] * float(se[i, j]))
    return t


def suite_transport(exp: Experiment, cache) -> Table:
    t = Table()
    d, N, tol, ch = exp.d, exp.N, exp.tol, exp.checks
    rng = _rng(exp, "transport")
    emb, frame = exp.emb, ch["frame"]
    order = min(ch["moment_order"], N)
    for k, f in enumerate(_random_vectors(rng, ch["random_vectors"], d)):
        lhs = jk_power_moments(exp.spec, emb, f, order, frame=frame)
        rhs = power_moments(exp.spec, emb.K @ f, order)
        for n in range(1, order + 1):
            t.add(f"<J_K(f{k})^{n} Omega, Omega> = <J(K f{k})^{n} Omega, Omega>", float(lhs[n]), float(rhs[n]), tol["transport"], rel_to=float(rhs[n]))
    for k, f in enumerate(_random_vectors(rng, 3, d)):
        t.add_bound(f"J_K(f{k}) conjugation vs entry formulas ({frame} frame)", construction_gap(exp.spec, emb, f, N, frame), tol["construction"])
    if N >= 2:
        scale = max(1.0, float(emb.singular_values[0]) ** 2)
        worst = max(jk_commutator_norm(exp.spec, emb, f, g, N) for f, g in _random_vectors(rng, 2 * ch["random_vectors"], d).reshape(-1, 2, d))
        t.add_bound(f"[J_K(f), J_K(g)] on degrees <= {N - 2}", worst, tol["commutator"] * scale)
    # U preserves exact-moment inner products
    n = min(4, N // 2)
    GH, GT = monomial_gram(exp.spec, n), monomial_gram(exp.spec, n, emb)
    Gam = np.zeros_like(GT)
    offs = fock.level_offsets(d, n)
    for j in range(n + 1):
        Gam[offs[j]:offs[j + 1], offs[j]:offs[j + 1]] = fock.tensor_power_map(emb.K, j)
    for k in range(3):
        x, y = rng.normal(size=(2, GT.shape[0]))
        lhs, rhs = float((Gam @ x) @ GH @ (Gam @ y)), float(x @ GT @ y)
        ref = math.sqrt(float((Gam @ x) @ GH @ (Gam @ x)) * float((Gam @ y) @ GH @ (Gam @ y)))
        t.add(f"int (Uq{k})(Ur{k}) d rho = int q{k} r{k} d rho_K, degree {n}", lhs, rhs, tol["isometry"], rel_to=ref)
    if exp.trivial_k:
        f = _random_vectors(rng, 1, d)[0]
        gap = float(np.abs(jk_matrix(exp.spec, emb, f, N, frame="standard") - assemble_operator(exp.spec, f, N).matrix).max())
        t.add_bound("K = Id: J_K(f) = J(f) entrywise", gap, tol["exact"])
        if exp.config["mc"]["samples"] >= 1:
            batch = _batch(exp, cache)
            same = np.array_equal(pushforward(emb, batch).samples, batch.samples)
            t.add_bound("K = Id: rho_K samples = rho samples", 0.0 if same else 1.0, tol["exact"])
    t.info["condition_number"] = emb.condition_number
    return t


def suite_chaos(exp: Experiment, cache) -> Table:
    t = Table()
    d, tol, ch = exp.d, exp.tol, exp.checks
    n = ch["chaos_degree"]
    sides = [("H", None, "standard")]
    if not exp.trivial_k:
        sides.append(("T", exp.emb, ch["frame"]))
    for side, emb, frame in sides:
        tag = "rho" if emb is None else f"rho_K ({frame} frame)"
        P = parseval_gram(exp.spec, n, emb, frame)
        t.add_bound(f"{tag}: Parseval Gram = Id, degree <= {n}", float(np.abs(P - np.eye(len(P))).max()), tol["parseval"])
        try:
            b = chaos_basis(exp.spec, n, emb, frame)
        except GramError as exc:
            t.add_bound(f"{tag}: Gram positive definite at level {exc.level}", float("inf"), 0.0)
            t.info[f"{side}_gram_error"] = str(exc)
            continue
        for m, dim in enumerate(b.level_dims()):
            t.add(f"{tag}: dim level {m} = C({m + d - 1}, {d - 1})", dim, math.comb(m + d - 1, d - 1), 0.0)
        t.add_bound(f"{tag}: cross-level inner products", b.cross_level_max(), tol["chaos"])
        X, degs = fourier_images(exp.spec, n, emb, frame)
        worst = max(leakage(b, DualPolynomial.from_flat(d, n, X[:, k], b.space), j) for k, j in enumerate(degs))
        t.add_bound(f"{tag}: {'fourier' if emb is None else 'i_k'} of level-n basis leaks outside level n", worst, tol["chaos"])
    return t


def suite_eigencheck(exp: Experiment, cache) -> Table:
    t = Table()
    d, tol, ch = exp.d, exp.tol, exp.checks
    N = min(ch["eigen_cutoff"], exp.N)
    rng = _rng(exp, "eigencheck")
    regs = regularity_operators(exp.spec, N)
    bigk = big_k(exp.emb, N)
    worst_p = worst_q = 0.0
    for xi in rng.normal(size=(ch["eigen_points"], d)):
        P = eigenvector(exp.spec, xi, N, regs=regs)
        Q = q_eigenvector(exp.spec, exp.emb, xi, N, regs=regs)
        for e in np.eye(d):
            worst_p = max(worst_p, eigenvector_residual(exp.spec, xi, P, e))
            worst_q = max(worst_q, q_eigenvector_residual(exp.spec, exp.emb, xi, Q, e, bigk=bigk))
    t.add_bound(f"P(xi) eigenvector residual, degrees <= {N - 1}", worst_p, tol["eigen"])
    t.add_bound(f"Q(omega) eigenvector residual, degrees <= {N - 1}", worst_q, tol["eigen"])
    return t


SUITE_FUNCS = {
    "validate": suite_validate,
    "moments": suite_moments,
    "charfun": suite_charfun,
    "transport": suite_transport,
    "chaos": suite_chaos,
    "eigencheck": suite_eigencheck,
}


# -- driver -------------------------------------------------------------------

def _suite_list(names) -> list:
    if "all" in names:
        return list(SUITES)
    return [s for s in SUITES if s in names]


def run(exp: Experiment, out_dir=None) -> tuple:
    """Run the configured suites; returns (report dict, exit code)."""
    cache = {}
    suites = {}
    for name in _suite_list(exp.config["suites"]):
        try:
            table = SUITE_FUNCS[name](exp, cache)
        except FockbenchError as exc:
            table = Table()
            table.add_bound(f"{name} suite raised {type(exc).__name__}: {exc}", float("inf"), 0.0)
        suites[name] = {"records": table.records, "info": table.info}
    total = sum(len(s["records"]) for s in suites.values())
    failed = sum(not r["pass"] for s in suites.values() for r in s["records"])
    report = {
        "fockbench_version": __version__,
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": exp.config,
        "setup": exp.info,
        "suites": suites,
        "summary": {"checks": total, "failed": failed, "pass": failed == 0},
    }
    if out_dir is not None:
        write_report(report, Path(out_dir), exp.config["output"]["format"])
    return report, 0 if failed == 0 else 1


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def write_report(report: dict, out_dir: Path, fmt: str = "csv") -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(_json_safe(report), indent=2) + "\n")
    if fmt != "csv":
        return
    cols = ["identity", "lhs", "rhs", "abs_err", "tol", "pass"]
    for name, suite in report["suites"].items():
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in suite["records"]:
                w.writerow([r[c] if not isinstance(r[c], list) else complex(*r[c]) for c in cols])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fockbench", description="Jacobi field and image-measure identity checks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the suites of a JSON configuration")
    p.add_argument("config", help="path to the JSON configuration")
    p.add_argument("--suite", action="append", choices=list(SUITES) + ["all"], help="suite to run (repeatable); overrides the config")
    p.add_argument("--seed", type=int, help="Monte Carlo seed; overrides mc.seed")
    p.add_argument("--out", help="output directory; overrides output.path")
    args = parser.parse_args(argv)

    overrides = {}
    if args.suite:
        overrides["suites"] = args.suite
    if args.seed is not None:
        overrides["mc"] = {"seed": args.seed}
    try:
        exp = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"fockbench: configuration error: {exc}", file=sys.stderr)
        return 2
    out = args.out or exp.config["output"]["path"]
    report, code = run(exp, out)
    s = report["summary"]
    for name, suite in report["suites"].items():
        bad = sum(not r["pass"] for r in suite["records"])
        print(f"{name:<11} {len(suite['records']) - bad}/{len(suite['records'])} pass")
    print(f"{'FAIL' if code else 'PASS'}: {s['checks'] - s['failed']}/{s['checks']} checks, report in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
