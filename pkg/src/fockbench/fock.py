"""Truncated symmetric Fock space over R^d.

Level n is Sym^n(C^d) with the orthonormal basis

    E_alpha = sqrt(n!/alpha!) * Sym(e_1^{x alpha_1} x ... x e_d^{x alpha_d}),   |alpha| = n,

where Sym is the averaging projection and the inner product is the one
inherited from the full tensor power.  Within a level the multi-indices are
ordered graded-lexicographically: descending in alpha_1, then alpha_2, ...
For d=2, n=2 this gives (2,0), (1,1), (0,2).

In this basis the creation operator acts as

    create(e_i) E_alpha = sqrt(alpha_i + 1) E_{alpha + delta_i}

and the annihilation operator is its adjoint.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, TruncationError

MultiIndex = tuple  # tuple[int, ...]; degree is sum(alpha)


@lru_cache(maxsize=None)
def _basis(d: int, n: int) -> tuple:
    if d < 1 or n < 0:
        raise ValueError(f"need d >= 1 and n >= 0, got d={d}, n={n}")
    out = []
    for combo in itertools.combinations_with_replacement(range(d), n):
        alpha = [0] * d
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return tuple(out)


def enumerate_basis(d: int, n: int) -> list:
    """Multi-indices of degree n in d variables, graded-lex order."""
    return list(_basis(d, n))


def level_dim(d: int, n: int) -> int:
    return math.comb(n + d - 1, d - 1)


@lru_cache(maxsize=None)
def index_map(d: int, n: int) -> dict:
    return {alpha: k for k, alpha in enumerate(_basis(d, n))}


@lru_cache(maxsize=None)
def level_offsets(d: int, cutoff: int) -> tuple:
    """Start offsets of each level in the flat layout, plus the total size."""
    offs = [0]
    for n in range(cutoff + 1):
        offs.append(offs[-1] + level_dim(d, n))
    return tuple(offs)


def total_dim(d: int, cutoff: int) -> int:
    return level_offsets(d, cutoff)[-1]


def multi_factorial(alpha) -> int:
    return math.prod(math.factorial(a) for a in alpha)


@lru_cache(maxsize=None)
def _raise_matrix(d: int, n: int, i: int) -> sp.csr_matrix:
    # create(e_i): level n -> level n+1
    src = _basis(d, n)
    dst = index_map(d, n + 1)
    rows, cols, vals = [], [], []
    for col, alpha in enumerate(src):
        up = list(alpha)
        up[i] += 1
        rows.append(dst[tuple(up)])
        cols.append(col)
        vals.append(math.sqrt(alpha[i] + 1))
    m = sp.csr_matrix((vals, (rows, cols)), shape=(level_dim(d, n + 1), level_dim(d, n)))
    m.sort_indices()
    return m


def _as_vector(phi, d=None) -> np.ndarray:
    phi = np.asarray(phi)
    if phi.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {phi.shape}")
    if d is not None and phi.shape[0] != d:
        raise DimensionError(f"vector of length {phi.shape[0]} does not match d={d}")
    return phi


def create_matrix(phi, n: int) -> sp.csr_matrix:
    """Matrix of create(phi) from level n to level n+1 (sparse)."""
    phi = _as_vector(phi)
    d = phi.shape[0]
    dtype = np.result_type(phi.dtype, np.float64)
    out = sp.csr_matrix((level_dim(d, n + 1), level_dim(d, n)), dtype=dtype)
    for i, c in enumerate(phi):
        if c != 0:
            out = out + c * _raise_matrix(d, n, i)
    return out.tocsr()


def annihilate_matrix(phi, n: int) -> sp.csr_matrix:
    """Matrix of annihilate(phi) from level n+1 to level n; adjoint of create."""
    return create_matrix(phi, n).conj().T.tocsr()


def second_quantization(B, n: int) -> np.ndarray:
    """Slot-wise lift of the one-particle operator B to level n.

    Equals sum_ij B_ij create(e_i) annihilate(e_j) on Sym^n.
    """
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DimensionError(f"B must be square, got shape {B.shape}")
    d = B.shape[0]
    dim = level_dim(d, n)
    dtype = np.result_type(B.dtype, np.float64)
    if n == 0:
        return np.zeros((1, 1), dtype=dtype)
    out = sp.csr_matrix((dim, dim), dtype=dtype)
    for i in range(d):
        ri = _raise_matrix(d, n - 1, i)
        for j in range(d):
            if B[i, j] != 0:
                out = out + B[i, j] * (ri @ _raise_matrix(d, n - 1, j).T)
    return out.toarray()


def tensor_power_map(A, n: int) -> np.ndarray:
    """Restriction of A^{x n} to Sym^n, as a dense matrix in the E_alpha basis.

    Built from A^{x n} E_alpha = (alpha!)^{-1/2} prod_i create(A e_i)^{alpha_i} Omega,
    one creation at a time.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got shape {A.shape}")
    d = A.shape[0]
    dtype = np.result_type(A.dtype, np.float64)
    cols = np.ones((1, 1), dtype=dtype)
    for m in range(1, n + 1):
        creators = [create_matrix(A[:, i], m - 1) for i in range(d)]
        prev = index_map(d, m - 1)
        basis = _basis(d, m)
        new = np.empty((level_dim(d, m), len(basis)), dtype=dtype)
        for j, alpha in enumerate(basis):
            i = next(k for k, a in enumerate(alpha) if a)
            parent = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1:]
            new[:, j] = creators[i] @ cols[:, prev[parent]] / math.sqrt(alpha[i])
        cols = new
    return cols


@dataclass(frozen=True)
class SymTensor:
    degree: int
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs)
        if coeffs.shape != (level_dim(self.dim, self.degree),):
            raise DimensionError(
                f"degree-{self.degree} tensor over d={self.dim} needs "
                f"{level_dim(self.dim, self.degree)} coefficients, got shape {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def basis_vector(cls, alpha) -> "SymTensor":
        alpha = tuple(int(a) for a in alpha)
        d, n = len(alpha), sum(alpha)
        c = np.zeros(level_dim(d, n))
        c[index_map(d, n)[alpha]] = 1.0
        return cls(n, d, c)

    @classmethod
    def scalar(cls, value, dim: int) -> "SymTensor":
        return cls(0, dim, np.array([value]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other: "SymTensor") -> complex:
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise DimensionError("inner product between different levels")
        return np.vdot(self.coeffs, other.coeffs)

    def __getitem__(self, alpha):
        return self.coeffs[index_map(self.dim, self.degree)[tuple(alpha)]]


def create(phi, t: SymTensor) -> SymTensor:
    phi = _as_vector(phi, t.dim)
    return SymTensor(t.degree + 1, t.dim, create_matrix(phi, t.degree) @ t.coeffs)


def annihilate(phi, t: SymTensor) -> SymTensor:
    phi = _as_vector(phi, t.dim)
    if t.degree < 1:
        raise ValueError("cannot annihilate a degree-0 tensor")
    return SymTensor(t.degree - 1, t.dim, annihilate_matrix(phi, t.degree - 1) @ t.coeffs)


@dataclass(frozen=True)
class FockVector:
    """Graded vector (Phi_0, ..., Phi_N) with levels stored as coefficient arrays."""

    dim: int
    cutoff: int
    levels: tuple

    def __post_init__(self):
        if len(self.levels) != self.cutoff + 1:
            raise DimensionError(f"expected {self.cutoff + 1} levels, got {len(self.levels)}")
        levels = tuple(np.asarray(x) for x in self.levels)
        for n, x in enumerate(levels):
            if x.shape != (level_dim(self.dim, n),):
                raise DimensionError(f"level {n} has shape {x.shape}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def vacuum(cls, dim: int, cutoff: int) -> "FockVector":
        levels = [np.zeros(level_dim(dim, n)) for n in range(cutoff + 1)]
        levels[0][0] = 1.0
        return cls(dim, cutoff, tuple(levels))

    @classmethod
    def zeros(cls, dim: int, cutoff: int, dtype=float) -> "FockVector":
        return cls(dim, cutoff, tuple(np.zeros(level_dim(dim, n), dtype=dtype) for n in range(cutoff + 1)))

    @classmethod
    def from_flat(cls, dim: int, cutoff: int, x) -> "FockVector":
        x = np.asarray(x)
        offs = level_offsets(dim, cutoff)
        if x.shape != (offs[-1],):
            raise DimensionError(f"flat vector of shape {x.shape}, expected ({offs[-1]},)")
        return cls(dim, cutoff, tuple(x[offs[n]:offs[n + 1]].copy() for n in range(cutoff + 1)))

    @classmethod
    def from_tensor(cls, t: SymTensor, cutoff: int) -> "FockVector":
        if t.degree > cutoff:
            raise TruncationError(f"degree {t.degree} exceeds cutoff {cutoff}")
        v = cls.zeros(t.dim, cutoff, dtype=t.coeffs.dtype)
        levels = list(v.levels)
        levels[t.degree] = t.coeffs.copy()
        return cls(t.dim, cutoff, tuple(levels))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def level(self, n: int) -> SymTensor:
        return SymTensor(n, self.dim, self.levels[n])

    def top_degree(self, atol: float = 0.0) -> int:
        """Highest level with a nonzero component (0 for the zero vector)."""
        for n in range(self.cutoff, -1, -1):
            if np.any(np.abs(self.levels[n]) > atol):
                return n
        return 0

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(x, x).real for x in self.levels)))

    def inner(self, other: "FockVector") -> complex:
        return sum(np.vdot(x, y) for x, y in zip(self.levels, other.levels))

    def __add__(self, other):
        return FockVector(self.dim, self.cutoff, tuple(x + y for x, y in zip(self.levels, other.levels)))

    def __sub__(self, other):
        return FockVector(self.dim, self.cutoff, tuple(x - y for x, y in zip(self.levels, other.levels)))

    def __mul__(self, c):
        return FockVector(self.dim, self.cutoff, tuple(c * x for x in self.levels))

    __rmul__ = __mul__
