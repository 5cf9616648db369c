"""Jacobi-field presets and the block three-diagonal operators J(phi).

A field is given by its two block generators: a_block(phi, n) maps level n to
level n+1, b_block(phi, n) maps level n to itself.  J(phi) on the truncated
space is

    (J(phi) Phi)_n = a_{n-1}(phi) Phi_{n-1} + b_n(phi) Phi_n + a_n(phi)^* Phi_{n+1}

with everything above the cutoff dropped.  A product of k operators applied
to a vector supported on degrees <= N-k is therefore exact.

Poisson preset: H is L^2 of a finite grid with quadrature weights w_i, and all
vectors are kept in orthonormal coordinates u_i = sqrt(w_i) f(x_i), so the
multiplication operator by phi is diag(phi_i / sqrt(w_i)).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import fock
from .errors import DimensionError, TruncationError


@dataclass(frozen=True)
class FieldSpec:
    dim: int
    kind: str
    a_block: Callable
    b_block: Callable
    weights: Optional[np.ndarray] = None
    # only for kind == "conjugated"
    base: Optional["FieldSpec"] = None
    embedding: object = None

    def check_vector(self, phi) -> np.ndarray:
        phi = np.asarray(phi)
        if phi.shape != (self.dim,):
            raise DimensionError(f"index vector of shape {phi.shape} for a field over d={self.dim}")
        return phi


def _zero_block(phi, n):
    phi = np.asarray(phi)
    dim = fock.level_dim(phi.shape[0], n)
    return sp.csr_matrix((dim, dim), dtype=np.result_type(phi.dtype, np.float64))


def gaussian_field(d: int) -> FieldSpec:
    """Free field: a_n(phi) = sqrt(n+1) phi (x) . , b_n = 0."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return FieldSpec(d, "gaussian", fock.create_matrix, _zero_block)


def poisson_field(d: int, weights=None) -> FieldSpec:
    """Poisson field on a d-point grid with intensities ``weights``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (d,):
        raise DimensionError(f"need {d} weights, got shape {w.shape}")
    if np.any(~(w > 0)):
        raise ValueError(f"Poisson intensities must be positive, got {w}")
    inv_sqrt_w = 1.0 / np.sqrt(w)

    def b_block(phi, n):
        phi = np.asarray(phi)
        if n == 0:
            return _zero_block(phi, 0)
        return sp.csr_matrix(fock.second_quantization(np.diag(phi * inv_sqrt_w), n))

    return FieldSpec(d, "poisson", fock.create_matrix, b_block, weights=w)


@dataclass
class AssembledOperator:
    """J(phi) truncated at ``cutoff``; kept sparse, ``matrix`` gives the dense form."""

    dim: int
    cutoff: int
    lower: list  # a_0 .. a_{N-1}
    diag: list  # b_0 .. b_N
    sparse: sp.csr_matrix = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.sparse.toarray()

    @property
    def upper(self) -> list:
        return [sp.csr_matrix(a).conj().T for a in self.lower]

    def apply(self, x):
        if isinstance(x, fock.FockVector):
            return fock.FockVector.from_flat(self.dim, self.cutoff, self.sparse @ x.flat())
        return self.sparse @ x

    def block_bandwidth(self) -> int:
        offs = fock.level_offsets(self.dim, self.cutoff)
        coo = self.sparse.tocoo()
        if coo.nnz == 0:
            return 0
        lv = np.searchsorted(offs, np.arange(offs[-1]), side="right") - 1
        return int(np.max(np.abs(lv[coo.row] - lv[coo.col])))


def assemble_operator(spec: FieldSpec, phi, N: int) -> AssembledOperator:
    if N < 0:
        raise ValueError("cutoff must be >= 0")
    phi = spec.check_vector(phi)
    lower = [spec.a_block(phi, n) for n in range(N)]
    diag = [spec.b_block(phi, n) for n in range(N + 1)]
    grid = [[None] * (N + 1) for _ in range(N + 1)]
    for n in range(N + 1):
        grid[n][n] = sp.csr_matrix(diag[n])
    for n, a in enumerate(lower):
        a = sp.csr_matrix(a)
        grid[n + 1][n] = a
        grid[n][n + 1] = a.conj().T
    if N == 0:
        mat = sp.csr_matrix(diag[0])
    else:
        mat = sp.bmat(grid, format="csr")
    return AssembledOperator(spec.dim, N, lower, diag, mat)


def vacuum_moments(spec: FieldSpec, phis, N: Optional[int] = None) -> float:
    """<J(phi_1) ... J(phi_n) Omega, Omega> on the cutoff-N space (N >= n)."""
    phis = [spec.check_vector(p) for p in phis]
    n = len(phis)
    if N is None:
        N = n
    if N < n:
        raise TruncationError(f"cutoff {N} < number of factors {n}: moment would be truncated")
    ops = {}
    v = fock.FockVector.vacuum(spec.dim, N).flat()
    for phi in reversed(phis):
        key = phi.tobytes()
        if key not in ops:
            ops[key] = assemble_operator(spec, phi, N).sparse
        v = ops[key] @ v
    out = v[0]
    return float(out.real) if np.isrealobj(out) or abs(out.imag) == 0 else complex(out)


def power_moments(spec: FieldSpec, phi, n_max: int, N: Optional[int] = None) -> np.ndarray:
    """[<J(phi)^k Omega, Omega> for k = 0..n_max] from a single operator."""
    N = n_max if N is None else N
    if N < n_max:
        raise TruncationError(f"cutoff {N} < moment order {n_max}")
    J = assemble_operator(spec, phi, N).sparse
    v = fock.FockVector.vacuum(spec.dim, N).flat()
    out = [v[0]]
    for _ in range(n_max):
        v = J @ v
        out.append(v[0])
    return np.real_if_close(np.array(out))


@dataclass
class FieldReport:
    kind: str
    cutoff: int
    tolerance: float
    reality: dict
    block_norms: dict
    commutator_norms: list
    linearity_residuals: dict
    vnn_condition: dict
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "cutoff": self.cutoff,
            "tolerance": self.tolerance,
            "reality": self.reality,
            "block_norms": self.block_norms,
            "commutator_norms": self.commutator_norms,
            "linearity_residuals": self.linearity_residuals,
            "vnn_condition": self.vnn_condition,
            "failures": self.failures,
            "ok": self.ok,
        }


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def commutator_norm(spec: FieldSpec, phi, psi, N: int) -> float:
    """Frobenius norm of [J(phi), J(psi)] restricted to degrees <= N-2."""
    if N < 2:
        raise TruncationError("commutator check needs cutoff >= 2")
    A = assemble_operator(spec, phi, N).sparse
    B = assemble_operator(spec, psi, N).sparse
    safe = fock.level_offsets(spec.dim, N)[N - 1]
    C = (A @ B[:, :safe]) - (B @ A[:, :safe])
    return float(sp.linalg.norm(C)) if sp.issparse(C) else float(np.linalg.norm(C))


def validate_field(spec: FieldSpec, N: int, tolerance: float = 1e-12, n_pairs: int = 20, seed: int = 0) -> FieldReport:
    """Finite-dimensional checks of the Jacobi-field conditions (a)-(e).

    Nothing is raised; failing checks are listed in ``report.failures``.
    """
    from .spectral import regularity_operators

    rng = np.random.default_rng(seed)
    d = spec.dim
    failures = []
    basis = list(np.eye(d))

    # (a) real inputs give real blocks; diagonal blocks are symmetric
    max_imag, max_asym = 0.0, 0.0
    for phi in basis:
        for n in range(N + 1):
            b = _dense(spec.b_block(phi, n))
            max_imag = max(max_imag, float(np.abs(np.imag(b)).max(initial=0.0)))
            max_asym = max(max_asym, float(np.abs(b - b.conj().T).max(initial=0.0)))
            if n < N:
                a = _dense(spec.a_block(phi, n))
                max_imag = max(max_imag, float(np.abs(np.imag(a)).max(initial=0.0)))
    reality = {"max_imag": max_imag, "max_asymmetry": max_asym, "pass": max_imag <= tolerance and max_asym <= tolerance}
    if not reality["pass"]:
        failures.append(f"reality/symmetry: max imag {max_imag:.3e}, max asymmetry {max_asym:.3e}")

    # (b) finite-dimensional surrogate: record operator norms per level
    block_norms = {"a": [], "b": []}
    for n in range(N + 1):
        block_norms["b"].append(max(float(np.linalg.norm(_dense(spec.b_block(phi, n)), 2)) for phi in basis))
        if n < N:
            block_norms["a"].append(max(float(np.linalg.norm(_dense(spec.a_block(phi, n)), 2)) for phi in basis))
    if not all(np.isfinite(block_norms["a"] + block_norms["b"])):
        failures.append("non-finite block norm")

    # (c) commutators on the safe subspace
    commutators = []
    if N >= 2:
        for _ in range(n_pairs):
            phi, psi = rng.normal(size=(2, d))
            commutators.append(commutator_norm(spec, phi, psi, N))
        worst = max(commutators)
        if worst > tolerance:
            failures.append(f"commutator norm {worst:.3e} > {tolerance:.1e}")

    # (d) linearity in the index vector
    lin = {"a": 0.0, "b": 0.0}
    for _ in range(3):
        phi, psi = rng.normal(size=(2, d))
        s, t = rng.normal(size=2)
        for n in range(N + 1):
            blocks = [("b", spec.b_block)] + ([("a", spec.a_block)] if n < N else [])
            for name, blk in blocks:
                r = _dense(blk(s * phi + t * psi, n)) - s * _dense(blk(phi, n)) - t * _dense(blk(psi, n))
                lin[name] = max(lin[name], float(np.abs(r).max(initial=0.0)))
    lin_tol = max(tolerance, 1e-10)
    if max(lin.values()) > lin_tol:
        failures.append(f"linearity residual {max(lin.values()):.3e}")

    # (e) diagonal regularity blocks
    vnn = {}
    regs = regularity_operators(spec, N)
    for n, reg in enumerate(regs):
        vnn[n] = reg.condition_number()
        if not np.isfinite(vnn[n]) or vnn[n] > 1e8:
            failures.append(f"V_{{{n},{n}}} condition number {vnn[n]:.3e}")

    return FieldReport(spec.kind, N, tolerance, reality, block_norms, commutators, lin, vnn, failures)
