"""Acceptance criteria 1-11, each at its stated tolerance.

Presets: Gaussian and Poisson fields over d = 3 (intensities 1, 0.5, 2).
Embeddings for the image family: identity, diag(2, 1, 1) and the derivative
preset on the grid {-2, 0, 2}.  Comparisons involving T-side coordinates use
the SVD orthonormal frame of T; standard-frame figures are also reported.
"""
import math

import numpy as np
import pytest

from fockbench import fock
from fockbench.chaos import chaos_basis, fourier_images, leakage, parseval_gram
from fockbench.cli import ConfigError, build_derivative_embedding, load_config, main
from fockbench.fields import assemble_operator, commutator_norm, gaussian_field, poisson_field, power_moments
from fockbench.measures import (
    MeasureModel,
    charfun_closed,
    empirical_charfun,
    empirical_covariance,
    pushforward,
    sample,
)
from fockbench.spectral import DualPolynomial, eigenvector, eigenvector_residual, regularity_operators
from fockbench.transport import (
    Embedding,
    big_k,
    conjugated_field,
    construction_gap,
    jk_commutator_norm,
    jk_matrix,
    jk_power_moments,
    q_eigenvector,
    q_eigenvector_residual,
)

import oracles

FIELDS = {"gauss": gaussian_field(3), "poisson": poisson_field(3, [1.0, 0.5, 2.0])}
EMBS = {
    "id": Embedding.identity(3),
    "diag": Embedding(np.diag([2.0, 1.0, 1.0])),
    "deriv": build_derivative_embedding(np.linspace(-2.0, 2.0, 3)),
}
MC_SAMPLES = 1_000_000
N_SE = 5.0


@pytest.fixture(scope="module")
def batches():
    return {name: sample(MeasureModel.for_field(spec, seed=2024), MC_SAMPLES) for name, spec in FIELDS.items()}


@pytest.mark.criterion(1)
def test_c1_gaussian_moments(detail):
    ops = power_moments(gaussian_field(1), [1.0], 10, N=10)
    ref = [oracles.gaussian_moment(n) for n in range(1, 11)]
    assert ref == [0, 1, 0, 3, 0, 15, 0, 105, 0, 945]
    err = max(abs(float(ops[n]) - ref[n - 1]) for n in range(1, 11))
    detail["max_abs_err"] = err
    assert err <= 1e-10


@pytest.mark.criterion(2)
def test_c2_poisson_moments(detail):
    ops = power_moments(poisson_field(1, [1.0]), [1.0], 6)
    ref = [oracles.poisson_central_moment(n) for n in range(2, 7)]
    assert [round(r) for r in ref[:3]] == [1, 1, 4]
    err = max(abs(float(ops[n]) - ref[n - 2]) for n in range(2, 7))
    detail["max_abs_err"] = err
    assert err <= 1e-10


@pytest.mark.criterion(3)
def test_c3_transport_identity(detail):
    rng = np.random.default_rng(3)
    worst = 0.0
    for spec in FIELDS.values():
        for emb in EMBS.values():
            for f in rng.normal(size=(20, 3)):
                lhs = jk_power_moments(spec, emb, f, 8)
                rhs = power_moments(spec, emb.K @ f, 8)
                for n in range(1, 9):
                    worst = max(worst, abs(lhs[n] - rhs[n]) / max(1.0, abs(rhs[n])))
    detail["max_rel_err"] = worst
    assert worst <= 1e-9


@pytest.mark.criterion(4)
def test_c4_dual_constructions(detail):
    rng = np.random.default_rng(4)
    worst = worst_std = 0.0
    N = 8
    for spec in FIELDS.values():
        for name, emb in EMBS.items():
            for f in rng.normal(size=(5, 3)):
                worst = max(worst, construction_gap(spec, emb, f, N, "orthonormal"))
                if name != "deriv":
                    worst_std = max(worst_std, construction_gap(spec, emb, f, N, "standard"))
    detail["max_gap_orthonormal"] = worst
    detail["max_gap_standard(id,diag)"] = worst_std
    assert worst <= 1e-10 and worst_std <= 1e-10


@pytest.mark.criterion(5)
def test_c5_characteristic_functions(detail, batches):
    rng = np.random.default_rng(5)
    exact_gap, worst_z, worst_cov_z = 0.0, 0.0, 0.0
    for fname, spec in FIELDS.items():
        model = MeasureModel.for_field(spec)
        for emb in EMBS.values():
            img = pushforward(emb, batches[fname])
            for f in rng.normal(size=(50, 3)) / math.sqrt(3):
                closed = charfun_closed(model, f, emb)
                target = charfun_closed(model, emb.K @ f)
                exact_gap = max(exact_gap, abs(closed - target))
                est = empirical_charfun(img, f)
                worst_z = max(worst_z, abs(est.value - target) / est.stderr)
            if fname == "gauss":
                cov, se = empirical_covariance(img)
                worst_cov_z = max(worst_cov_z, float(np.max(np.abs(cov - emb.gram_T) / se)))
    detail["closed_form_gap"] = exact_gap
    detail["max_charfun_z"] = worst_z
    detail["max_cov_z"] = worst_cov_z
    assert exact_gap == 0.0 and worst_z <= N_SE and worst_cov_z <= N_SE


@pytest.mark.criterion(6)
def test_c6_parseval(detail):
    n = 5
    worst_h = worst_t = worst_std = 0.0
    for spec in FIELDS.values():
        P = parseval_gram(spec, n)
        worst_h = max(worst_h, float(np.abs(P - np.eye(len(P))).max()))
        for name, emb in EMBS.items():
            P = parseval_gram(spec, n, emb, "orthonormal")
            worst_t = max(worst_t, float(np.abs(P - np.eye(len(P))).max()))
            if name == "deriv":
                P = parseval_gram(spec, n, emb, "standard")
                detail[f"deriv_standard_frame_{spec.kind}"] = float(np.abs(P - np.eye(len(P))).max())
            else:
                P = parseval_gram(spec, n, emb, "standard")
                worst_std = max(worst_std, float(np.abs(P - np.eye(len(P))).max()))
    detail["H"] = worst_h
    detail["T_orthonormal"] = worst_t
    detail["T_standard(id,diag)"] = worst_std
    assert max(worst_h, worst_t, worst_std) <= 1e-9


@pytest.mark.criterion(7)
def test_c7_eigenvectors(detail):
    N = 6
    rng = np.random.default_rng(7)
    worst_p = worst_q = 0.0
    for spec in FIELDS.values():
        regs = regularity_operators(spec, N)
        bks = {name: big_k(emb, N) for name, emb in EMBS.items()}
        for xi in rng.normal(size=(10, 3)):
            P = eigenvector(spec, xi, N, regs=regs)
            for e in np.eye(3):
                worst_p = max(worst_p, eigenvector_residual(spec, xi, P, e))
            for name, emb in EMBS.items():
                Q = q_eigenvector(spec, emb, xi, N, regs=regs)
                for e in np.eye(3):
                    worst_q = max(worst_q, q_eigenvector_residual(spec, emb, xi, Q, e, bigk=bks[name]))
    detail["P_residual"] = worst_p
    detail["Q_residual"] = worst_q
    assert worst_p <= 1e-8 and worst_q <= 1e-8


@pytest.mark.criterion(8)
def test_c8_chaotic_decompositions(detail):
    n = 4
    cross = leak = 0.0
    dims_ok = True
    for spec in FIELDS.values():
        sides = [(None, "standard")] + [(emb, "orthonormal") for emb in EMBS.values()]
        sides += [(EMBS["id"], "standard"), (EMBS["diag"], "standard")]
        for emb, frame in sides:
            b = chaos_basis(spec, n, emb, frame)
            dims_ok &= b.level_dims() == [math.comb(m + 2, 2) for m in range(n + 1)]
            cross = max(cross, b.cross_level_max())
            X, degs = fourier_images(spec, n, emb, frame)
            for k, j in enumerate(degs):
                leak = max(leak, leakage(b, DualPolynomial.from_flat(3, n, X[:, k], b.space), j))
    detail["level_dims_ok"] = dims_ok
    detail["max_cross_level"] = cross
    detail["max_leakage"] = leak
    assert dims_ok and cross <= 1e-8 and leak <= 1e-8


@pytest.mark.criterion(9)
def test_c9_commutativity(detail):
    N = 8
    rng = np.random.default_rng(9)
    worst_j = worst_jk = 0.0
    for spec in FIELDS.values():
        for phi, psi in rng.normal(size=(20, 2, 3)):
            worst_j = max(worst_j, commutator_norm(spec, phi, psi, N))
            for emb in EMBS.values():
                worst_jk = max(worst_jk, jk_commutator_norm(spec, emb, phi, psi, N))
    detail["J"] = worst_j
    detail["J_K"] = worst_jk
    assert worst_j <= 1e-12 and worst_jk <= 1e-12


@pytest.mark.criterion(10)
def test_c10_regularity(detail):
    worst = 0.0
    for spec in FIELDS.values():
        for n, reg in enumerate(regularity_operators(spec, 8)):
            ref = math.sqrt(math.factorial(n)) * np.eye(fock.level_dim(3, n))
            worst = max(worst, float(np.abs(reg.top - ref).max()))
    conds = [r.condition_number() for r in regularity_operators(conjugated_field(FIELDS["poisson"], EMBS["deriv"]), 8)]
    detail["max_dev"] = worst
    detail["conjugated_deriv_cond_V88"] = conds[-1]
    assert worst <= 1e-10
    assert all(np.isfinite(conds))


@pytest.mark.criterion(11)
def test_c11_degenerate_controls(detail, batches, tmp_path):
    emb = EMBS["id"]
    rng = np.random.default_rng(11)
    gap = 0.0
    for fname, spec in FIELDS.items():
        conj = conjugated_field(spec, emb)
        model = MeasureModel.for_field(spec)
        for f in rng.normal(size=(5, 3)):
            J = assemble_operator(spec, f, 6).matrix
            gap = max(gap, float(np.abs(assemble_operator(conj, f, 6).matrix - J).max()))
            for frame in ("standard", "orthonormal"):
                for method in ("blocks", "conjugation"):
                    gap = max(gap, float(np.abs(jk_matrix(spec, emb, f, 6, method, frame) - J).max()))
            gap = max(gap, abs(charfun_closed(model, f, emb) - charfun_closed(model, f)))
        same = np.array_equal(pushforward(emb, batches[fname]).samples, batches[fname].samples)
        gap = max(gap, 0.0 if same else 1.0)
    with pytest.raises(ConfigError):
        load_config({"preset": "custom", "field": "poisson", "d": 3, "K": {"type": "diag", "value": [1.0, 0.0, 1.0]}})
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"preset": "gauss-free", "d": 2, "K": {"type": "matrix", "value": [[1, 2], [2, 4]]}}')
    code = main(["run", str(cfg), "--out", str(tmp_path / "o")])
    detail["identity_gap"] = gap
    detail["non_injective_exit"] = code
    assert gap == 0.0 and code == 2
