import csv
import json
import math

import numpy as np
import pytest

from fockbench.cli import ConfigError, build_derivative_embedding, eval_diag_expr, load_config, main, run


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def strip_time(report):
    report = dict(report)
    report.pop("generated_at")
    return report


def test_derivative_embedding_example():
    emb = build_derivative_embedding([0.0, 1.0])
    D = np.array([[-1.0, 1.0], [0.0, -1.0]])
    np.testing.assert_allclose(emb.K, np.diag([1.0, math.exp(-0.5)]) @ D, rtol=1e-15)


def test_derivative_embedding_sees_constants():
    emb = build_derivative_embedding(np.linspace(-2, 2, 5))
    assert np.linalg.norm(emb.K @ np.full(5, 3.0)) > 0


@pytest.mark.parametrize("points", [2, 3, 8, 16, 33, 64])
def test_derivative_embedding_injective(points):
    s = build_derivative_embedding(np.linspace(-3, 3, points)).singular_values
    assert s.min() > 0
    assert np.linalg.matrix_rank(build_derivative_embedding(np.linspace(-3, 3, points)).K) == points


def test_derivative_embedding_degenerate_grid():
    for bad in ([1.0], [0.0, 0.0], [0.0, 1.0, 3.0], [2.0, 1.0]):
        with pytest.raises(ValueError):
            build_derivative_embedding(bad)


def test_diag_expr():
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(eval_diag_expr("exp(-x**2)", x), np.exp(-x ** 2))
    np.testing.assert_allclose(eval_diag_expr("2", x), np.full(5, 2.0))
    np.testing.assert_allclose(eval_diag_expr("cos(pi*x)/2 + 1", x), np.cos(np.pi * x) / 2 + 1)
    for bad in ("__import__('os')", "x.real", "exp(x, x)", "y + 1", "x +"):
        with pytest.raises(ValueError):
            eval_diag_expr(bad, x)


def test_gauss_free_moments(tmp_path, capsys):
    cfg = write(tmp_path, {"preset": "gauss-free", "d": 1, "cutoff": 10, "suites": ["moments"], "mc": {"samples": 20000}})
    assert main(["run", cfg, "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    recs = {r["identity"]: r for r in report["suites"]["moments"]["records"]}
    expected = [0, 1, 0, 3, 0, 15, 0, 105, 0, 945]
    for n, m in enumerate(expected, start=1):
        r = recs[f"<J(e1)^{n} Omega, Omega>"]
        assert r["rhs"] == m and r["pass"] and r["abs_err"] <= 1e-10
    with open(tmp_path / "out" / "moments.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["identity", "lhs", "rhs", "abs_err", "tol", "pass"]
    assert len(rows) == len(report["suites"]["moments"]["records"]) + 1
    assert "PASS" in capsys.readouterr().out


def test_gausskernel_charfun(tmp_path):
    cfg = {"preset": "poisson-gausskernel", "grid": {"L": 3, "points": 8}, "cutoff": 3, "suites": ["charfun"], "mc": {"samples": 200000, "seed": 3}}
    exp = load_config(cfg)
    np.testing.assert_allclose(np.diag(exp.emb.K), np.exp(-np.linspace(-3, 3, 8) ** 2))
    np.testing.assert_allclose(exp.spec.weights, 6 / 7)
    report, code = run(exp)
    assert code == 0
    exact = [r for r in report["suites"]["charfun"]["records"] if r["identity"].startswith("closed")]
    assert len(exact) == 50 and all(r["abs_err"] == 0.0 for r in exact)


def test_non_injective_k_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, {"preset": "custom", "field": "gaussian", "d": 3, "K": {"type": "diag", "value": [1, 0, 2]}})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "singular value" in err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"preset": "nope"},
        {"preset": "gauss-free"},
        {"preset": "gauss-free", "d": 2, "cutoff": 0},
        {"preset": "poisson-grid"},
        {"preset": "poisson-grid", "grid": {"L": 1, "points": 4}, "d": 3},
        {"preset": "custom", "d": 2},
        {"preset": "custom", "field": "poisson", "d": 2, "weights": [1.0]},
        {"preset": "custom", "field": "poisson", "d": 2, "weights": [1.0, -1.0]},
        {"preset": "gauss-free", "d": 2, "K": {"type": "matrix", "value": [[1, 2, 3]]}},
        {"preset": "gauss-free", "d": 2, "K": {"type": "derivative"}},
        {"preset": "poisson-grid", "grid": {"L": 1, "points": 3}, "K": {"type": "diag_expr", "expr": "open('x')"}},
        {"preset": "gauss-free", "d": 2, "unknown": 1},
    ],
)
def test_config_errors(tmp_path, cfg):
    with pytest.raises(ConfigError):
        load_config(cfg)
    assert main(["run", write(tmp_path, cfg)]) == 2


def test_unreadable_config(tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2


def test_failed_identity_exit_code(tmp_path):
    # a zero Monte Carlo allowance cannot be met
    cfg = {"preset": "gauss-free", "d": 1, "cutoff": 2, "suites": ["charfun"], "mc": {"samples": 1000}, "tolerances": {"n_se": 0}}
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["summary"]["failed"] > 0 and not report["summary"]["pass"]


def test_report_stability(tmp_path):
    cfg = write(tmp_path, {"preset": "poisson-derivative", "grid": {"L": 1, "points": 2}, "cutoff": 4, "mc": {"samples": 5000}, "checks": {"chaos_degree": 2}})
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert strip_time(a) == strip_time(b)
    assert set(a["suites"]) == {"validate", "moments", "charfun", "transport", "chaos", "eigencheck"}
    for name in a["suites"]:
        assert (tmp_path / "a" / f"{name}.csv").exists()


def test_overrides(tmp_path):
    cfg = write(tmp_path, {"preset": "gauss-free", "d": 1, "cutoff": 2, "suites": ["moments"], "mc": {"samples": 3000}, "output": {"format": "json"}})
    assert main(["run", cfg, "--suite", "charfun", "--seed", "9", "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert list(report["suites"]) == ["charfun"]
    assert report["config"]["mc"]["seed"] == 9
    assert not (tmp_path / "o" / "charfun.csv").exists()


def test_identity_k_controls_are_exact():
    exp = load_config({"preset": "custom", "field": "poisson", "d": 2, "weights": [1.0, 0.5], "cutoff": 4, "mc": {"samples": 100}})
    report, code = run(exp)
    assert code == 0
    recs = [r for r in report["suites"]["transport"]["records"] if r["identity"].startswith("K = Id")]
    assert len(recs) == 2 and all(r["abs_err"] == 0.0 for r in recs)
    exact = [r for r in report["suites"]["charfun"]["records"] if r["identity"].startswith("closed")]
    assert all(r["abs_err"] == 0.0 for r in exact)


def test_ill_conditioned_standard_frame_is_reported_not_raised():
    exp = load_config(
        {"preset": "poisson-derivative", "grid": {"L": 2, "points": 3}, "cutoff": 4, "suites": ["chaos"],
         "checks": {"frame": "standard", "chaos_degree": 4}}
    )
    report, code = run(exp)
    assert code == 1
    assert "T_gram_error" in report["suites"]["chaos"]["info"]
