"""Regularity operators V_n, the Fourier transform I and joint eigenvectors P(xi).

Points of the dual space are stored in functional coordinates, so that
<xi, phi> = xi . phi.  The pairing of xi^{x j} with a basis tensor is

    <xi^{x j}, E_alpha> = sqrt(j!/alpha!) prod_i xi_i^{alpha_i},

and a polynomial of degree n is sum_j <xi^{x j}, c_j> with c_j in Sym^j.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock
from .errors import DimensionError, SingularFieldError, TruncationError
from .fields import FieldSpec, assemble_operator

COND_WARN = 1e8


@lru_cache(maxsize=None)
def _monomial_tables(d: int, j: int):
    alphas = np.array(fock.enumerate_basis(d, j), dtype=int).reshape(-1, d)
    scale = np.array([math.sqrt(math.factorial(j) / fock.multi_factorial(a)) for a in alphas])
    return alphas, scale


def pairing_vector(xi, j: int) -> np.ndarray:
    """Components <xi^{x j}, E_alpha> for all |alpha| = j.

    ``xi`` may be a single point (d,) or a batch (m, d); the result has shape
    (dim_j,) or (m, dim_j).
    """
    xi = np.asarray(xi)
    single = xi.ndim == 1
    X = np.atleast_2d(xi)
    alphas, scale = _monomial_tables(X.shape[1], j)
    out = np.prod(X[:, None, :] ** alphas[None, :, :], axis=2) * scale
    return out[0] if single else out


@dataclass(frozen=True)
class DualPolynomial:
    """xi -> sum_j <xi^{x j}, c_j>; ``space`` is 'H' or 'T' (which dual it lives on)."""

    dim: int
    coeffs: tuple
    space: str = "H"

    def __post_init__(self):
        coeffs = tuple(np.asarray(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a polynomial needs at least the constant coefficient")
        for j, c in enumerate(coeffs):
            if c.shape != (fock.level_dim(self.dim, j),):
                raise DimensionError(f"coefficient {j} has shape {c.shape}")
        if self.space not in ("H", "T"):
            raise ValueError(f"unknown space tag {self.space!r}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, value, dim: int, space: str = "H") -> "DualPolynomial":
        return cls(dim, (np.array([value], dtype=float),), space)

    @classmethod
    def from_flat(cls, dim: int, degree: int, x, space: str = "H") -> "DualPolynomial":
        offs = fock.level_offsets(dim, degree)
        x = np.asarray(x)
        return cls(dim, tuple(x[offs[j]:offs[j + 1]] for j in range(degree + 1)), space)

    @classmethod
    def monomial(cls, alpha, space: str = "H") -> "DualPolynomial":
        """The polynomial <xi^{x |alpha|}, E_alpha>."""
        d, n = len(alpha), sum(alpha)
        coeffs = [np.zeros(fock.level_dim(d, j)) for j in range(n + 1)]
        coeffs[n][fock.index_map(d, n)[tuple(alpha)]] = 1.0
        return cls(d, tuple(coeffs), space)

    def flat(self, degree=None) -> np.ndarray:
        """Coefficients in the monomial family, padded with zeros up to ``degree``."""
        degree = self.degree if degree is None else degree
        if degree < self.degree:
            raise ValueError(f"cannot truncate a degree-{self.degree} polynomial to {degree}")
        pad = [np.zeros(fock.level_dim(self.dim, j)) for j in range(self.degree + 1, degree + 1)]
        return np.concatenate(list(self.coeffs) + pad)

    def __call__(self, xi):
        xi = np.asarray(xi)
        if xi.shape[-1] != self.dim:
            raise DimensionError(f"point of dimension {xi.shape[-1]} for a polynomial over d={self.dim}")
        return sum(pairing_vector(xi, j) @ c for j, c in enumerate(self.coeffs))

    def times_linear(self, phi) -> "DualPolynomial":
        """Coefficients of xi -> <xi, phi> p(xi).

        <xi, phi><xi^{x j}, c> = <xi^{x (j+1)}, phi (x)^ c> and
        phi (x)^ c = create(phi) c / sqrt(j+1).
        """
        phi = np.asarray(phi)
        coeffs = [np.zeros(1, dtype=np.result_type(phi, *self.coeffs))]
        for j, c in enumerate(self.coeffs):
            coeffs.append(fock.create_matrix(phi, j) @ c / math.sqrt(j + 1))
        return DualPolynomial(self.dim, tuple(coeffs), self.space)

    def __add__(self, other):
        n = max(self.degree, other.degree)
        return DualPolynomial.from_flat(self.dim, n, self.flat(n) + other.flat(n), self.space)

    def __sub__(self, other):
        n = max(self.degree, other.degree)
        return DualPolynomial.from_flat(self.dim, n, self.flat(n) - other.flat(n), self.space)

    def __mul__(self, c):
        return DualPolynomial(self.dim, tuple(c * x for x in self.coeffs), self.space)

    __rmul__ = __mul__


@dataclass(frozen=True)
class RegularityOperator:
    """V_n : Sym^n -> levels 0..n; ``blocks[m]`` is the (dim_m x dim_n) component."""

    n: int
    dim: int
    blocks: tuple

    @property
    def top(self) -> np.ndarray:
        return self.blocks[self.n]

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack(self.blocks)

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.top))

    def apply(self, F, cutoff=None) -> fock.FockVector:
        cutoff = self.n if cutoff is None else cutoff
        levels = [b @ np.asarray(F) for b in self.blocks]
        levels += [np.zeros(fock.level_dim(self.dim, m)) for m in range(self.n + 1, cutoff + 1)]
        return fock.FockVector(self.dim, cutoff, tuple(levels))


def regularity_operators(spec: FieldSpec, N: int) -> list:
    """V_0 .. V_N, computed from products J(e_1)^{a_1} ... J(e_d)^{a_d} Omega.

    V_n E_alpha = sqrt(n!/alpha!) J(e)^alpha Omega because
    e^{(x)alpha} = sqrt(alpha!/n!) E_alpha.  The vector J(e)^alpha Omega lives on
    degrees <= |alpha|, so cutoff N is exact for every |alpha| <= N.
    """
    d = spec.dim
    ops = [assemble_operator(spec, e, N).sparse for e in np.eye(d)]
    offs = fock.level_offsets(d, N)
    vac = fock.FockVector.vacuum(d, N).flat()
    prev = {(0,) * d: vac}
    out = [RegularityOperator(0, d, (np.ones((1, 1)),))]
    for n in range(1, N + 1):
        cur = {}
        basis = fock.enumerate_basis(d, n)
        cols = np.empty((offs[n + 1], len(basis)), dtype=vac.dtype)
        for k, alpha in enumerate(basis):
            i = next(j for j, a in enumerate(alpha) if a)
            parent = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1:]
            w = ops[i] @ prev[parent]
            cur[alpha] = w
            cols[:, k] = w[: offs[n + 1]] * math.sqrt(math.factorial(n) / fock.multi_factorial(alpha))
        blocks = tuple(cols[offs[m]:offs[m + 1]] for m in range(n + 1))
        out.append(RegularityOperator(n, d, blocks))
        prev = cur
    return out


def v_operator(spec: FieldSpec, n: int, N=None) -> RegularityOperator:
    N = n if N is None else N
    if N < n:
        raise TruncationError(f"V_{n} needs cutoff >= {n}, got {N}")
    return regularity_operators(spec, n)[n]


def _solve_top(top: np.ndarray, rhs: np.ndarray, n: int, transpose=False) -> np.ndarray:
    cond = np.linalg.cond(top)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularFieldError(f"V_{{{n},{n}}} is numerically singular (cond={cond:.3e})")
    if cond > COND_WARN:
        warnings.warn(f"V_{{{n},{n}}} is ill-conditioned (cond={cond:.3e})", RuntimeWarning, stacklevel=3)
    return np.linalg.solve(top.T if transpose else top, rhs)


def fourier(spec: FieldSpec, Phi: fock.FockVector, regs=None) -> DualPolynomial:
    """I Phi as a polynomial, by back-substitution Phi = sum_j V_j F_j."""
    if Phi.dim != spec.dim:
        raise DimensionError("Fock vector and field have different dimensions")
    n = Phi.top_degree()
    if regs is None:
        regs = regularity_operators(spec, n)
    resid = [np.array(x, dtype=np.result_type(x, float)) for x in Phi.levels[: n + 1]]
    coeffs = [None] * (n + 1)
    for j in range(n, -1, -1):
        F = _solve_top(regs[j].top, resid[j], j)
        coeffs[j] = F
        for m in range(j + 1):
            resid[m] = resid[m] - regs[j].blocks[m] @ F
    return DualPolynomial(spec.dim, tuple(coeffs), "H")


def inverse_fourier(spec: FieldSpec, p: DualPolynomial, N=None, regs=None) -> fock.FockVector:
    """sum_j V_j c_j, embedded at cutoff N >= deg p."""
    N = p.degree if N is None else N
    if N < p.degree:
        raise TruncationError(f"cutoff {N} below polynomial degree {p.degree}")
    if regs is None:
        regs = regularity_operators(spec, p.degree)
    dtype = np.result_type(*p.coeffs, float)
    out = fock.FockVector.zeros(spec.dim, N, dtype=dtype)
    for j, c in enumerate(p.coeffs):
        out = out + regs[j].apply(c, N)
    return out


def eigenvector(spec: FieldSpec, xi, N: int, regs=None) -> list:
    """Components P_0(xi) .. P_N(xi) solving <V_n F, P(xi)> = <xi^{x n}, F>.

    Returned in functional coordinates (P_n . F is the pairing).
    """
    xi = spec.check_vector(xi)
    if regs is None:
        regs = regularity_operators(spec, N)
    P = []
    for n in range(N + 1):
        rhs = pairing_vector(xi, n).astype(np.result_type(xi, float))
        for m in range(n):
            rhs = rhs - regs[n].blocks[m].T @ P[m]
        P.append(_solve_top(regs[n].top, rhs, n, transpose=True))
    return P


def eigenvector_residual(spec: FieldSpec, xi, P, phi) -> float:
    """Relative residual of <P, J(phi) Phi> = <xi, phi> <P, Phi> over basis Phi of degree <= N-1."""
    N = len(P) - 1
    d = spec.dim
    J = assemble_operator(spec, phi, N).sparse
    p = np.concatenate(P)
    safe = fock.level_offsets(d, N)[N]
    lhs = (J.T @ p)[:safe]
    rhs = float(np.dot(xi, phi)) * p[:safe]
    scale = np.abs(lhs).max(initial=0.0) + np.abs(rhs).max(initial=0.0)
    return float(np.abs(lhs - rhs).max(initial=0.0) / max(scale, 1e-300))
