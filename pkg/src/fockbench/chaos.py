"""Exact monomial Gram matrices, chaos bases and projections.

The monomial family of degree <= n is {<x^{x j}, E_alpha> : |alpha| = j <= n},
the same family in which DualPolynomial stores its coefficients, so a
polynomial's flat coefficient vector is its coordinate vector here.

Moments int x^gamma are vacuum expectations of products of the field (or of
J_K in the t-basis for the image measure); nothing is sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fock
from .errors import DimensionError, GramError, TruncationError
from .fields import FieldSpec, assemble_operator
from .spectral import DualPolynomial, fourier, pairing_vector, regularity_operators

PD_RTOL = 1e-10


def monomial_labels(d: int, n: int) -> list:
    return [alpha for j in range(n + 1) for alpha in fock.enumerate_basis(d, j)]


def _field_for(spec: FieldSpec, emb):
    if emb is None:
        return spec
    from .transport import conjugated_field

    return conjugated_field(spec, emb)


def frame_maps(emb, frame: str = "standard") -> tuple:
    """(KB, W) for T-side coordinates.

    W holds the vectors of T whose pairings <omega, W_i> are the polynomial
    coordinates; B holds the one-particle basis of the T-Fock vectors.
    "standard": W = Id and B = t-basis, so KB = Id.
    "orthonormal": W = B = V Sigma^{-1} from K = U Sigma V^T, so KB = U.
    In standard coordinates Gram identities lose about cond(K)^{2n} digits.
    """
    if frame == "standard":
        return np.eye(emb.dim), np.eye(emb.dim)
    if frame == "orthonormal":
        U, s, Vt = np.linalg.svd(emb.K)
        return U, Vt.T / s
    raise ValueError(f"unknown frame {frame!r}")


def moment_table(spec: FieldSpec, order: int, emb=None, N: Optional[int] = None, frame: str = "standard") -> dict:
    """{gamma: <J(e)^gamma Omega, Omega>} for all |gamma| <= order.

    With ``emb`` the moments are those of rho_K in the coordinates
    <omega, W_i> of ``frame``, computed from J_K(W_i) in the t-basis of F(T),
    where the vacuum is again the first coordinate.
    """
    N = order if N is None else N
    if N < order:
        raise TruncationError(f"moments of order {order} need cutoff >= {order}, got {N}")
    field = _field_for(spec, emb)
    d = spec.dim
    W = np.eye(d) if emb is None else frame_maps(emb, frame)[1]
    J = [assemble_operator(field, w, N).sparse for w in W.T]
    vac = fock.FockVector.vacuum(d, N).flat()
    vecs = {(0,) * d: vac}
    for k in range(1, order + 1):
        for gamma in fock.enumerate_basis(d, k):
            i = next(i for i in range(d) if gamma[i])
            prev = list(gamma)
            prev[i] -= 1
            vecs[gamma] = J[i] @ vecs[tuple(prev)]
    return {g: float(v[0]) for g, v in vecs.items()}


def monomial_gram(spec: FieldSpec, n: int, emb=None, N: Optional[int] = None, frame: str = "standard") -> np.ndarray:
    """Gram matrix of the degree-<=n monomial family under rho (or rho_K)."""
    N = 2 * n if N is None else N
    if N < 2 * n:
        raise TruncationError(f"degree-{n} Gram needs cutoff >= {2 * n}, got {N}")
    m = moment_table(spec, 2 * n, emb, N, frame)
    labels = monomial_labels(spec.dim, n)
    scale = np.array([math.sqrt(math.factorial(sum(a)) / fock.multi_factorial(a)) for a in labels])
    G = np.empty((len(labels), len(labels)))
    for r, a in enumerate(labels):
        for c, b in enumerate(labels[r:], start=r):
            G[r, c] = G[c, r] = scale[r] * scale[c] * m[tuple(x + y for x, y in zip(a, b))]
    return G


@dataclass
class ChaosBasis:
    """Orthonormal polynomials grouped by chaos level.

    ``levels[m]`` has one row per basis polynomial of level m, holding its
    coefficients in the monomial family ``labels``.
    """

    dim: int
    degree: int
    labels: list
    gram: np.ndarray
    levels: list
    space: str = "H"

    def level_dims(self) -> list:
        return [L.shape[0] for L in self.levels]

    def polynomial(self, m: int, k: int) -> DualPolynomial:
        return DualPolynomial.from_flat(self.dim, self.degree, self.levels[m][k], self.space)

    def matrix(self) -> np.ndarray:
        return np.vstack(self.levels)

    def cross_level_max(self) -> float:
        """Largest |<p, q>| over basis polynomials from different levels."""
        out = 0.0
        for i, A in enumerate(self.levels):
            for B in self.levels[i + 1:]:
                out = max(out, float(np.abs(A @ self.gram @ B.T).max(initial=0.0)))
        return out

    def orthonormality_error(self) -> float:
        C = self.matrix()
        return float(np.abs(C @ self.gram @ C.T - np.eye(C.shape[0])).max())


def chaotic_subspaces(gram, labels, space: str = "H") -> ChaosBasis:
    """Modified Gram-Schmidt in the Gram inner product, degree by degree,
    with one reorthogonalization pass."""
    G = np.asarray(gram, dtype=float)
    labels = [tuple(a) for a in labels]
    if G.shape != (len(labels), len(labels)):
        raise DimensionError("Gram matrix and labels do not match")
    degs = np.array([sum(a) for a in labels])
    if np.any(np.diff(degs) < 0):
        raise ValueError("labels must be sorted by total degree")
    d, n = len(labels[0]), int(degs.max())
    for m in range(n + 1):
        sub = G[np.ix_(degs <= m, degs <= m)]
        ev = np.linalg.eigvalsh(sub)
        if ev[0] < PD_RTOL * ev[-1]:
            raise GramError(f"Gram matrix numerically singular at level {m} (eigenvalues {ev[0]:.3e} .. {ev[-1]:.3e})", level=m)
    basis = []
    levels = []
    for m in range(n + 1):
        rows = []
        for k in np.flatnonzero(degs == m):
            v = np.zeros(len(labels))
            v[k] = 1.0
            for _ in range(2):
                for u in basis + rows:
                    v = v - (u @ G @ v) * u
            nrm2 = v @ G @ v
            if nrm2 <= 0:
                raise GramError(f"lost positivity at level {m}", level=m)
            rows.append(v / math.sqrt(nrm2))
        basis.extend(rows)
        levels.append(np.array(rows))
    return ChaosBasis(d, n, labels, G, levels, space)


def chaos_basis(spec: FieldSpec, n: int, emb=None, frame: str = "standard") -> ChaosBasis:
    G = monomial_gram(spec, n, emb, frame=frame)
    return chaotic_subspaces(G, monomial_labels(spec.dim, n), "H" if emb is None else "T")


@dataclass
class Projection:
    coefficients: list  # per level, against the orthonormal basis
    components: list  # per level, as DualPolynomial
    residual: float  # Gram norm of p minus the sum of its components

    def level_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(c) for c in self.coefficients])


def project(basis: ChaosBasis, p: DualPolynomial) -> Projection:
    if p.degree > basis.degree:
        raise ValueError(f"degree-{p.degree} polynomial exceeds basis degree {basis.degree}")
    if p.dim != basis.dim:
        raise DimensionError("polynomial and basis dimensions differ")
    x = p.flat(basis.degree)
    Gx = basis.gram @ x
    coefs, comps = [], []
    recon = np.zeros_like(x)
    for L in basis.levels:
        a = L @ Gx
        coefs.append(a)
        y = L.T @ a
        recon = recon + y
        comps.append(DualPolynomial.from_flat(basis.dim, basis.degree, y, basis.space))
    r = x - recon
    return Projection(coefs, comps, float(math.sqrt(max(r @ basis.gram @ r, 0.0))))


def leakage(basis: ChaosBasis, p: DualPolynomial, level: int) -> float:
    """Norm of the part of p outside chaos ``level`` (including the residual)."""
    pr = project(basis, p)
    other = [float(np.linalg.norm(c)) for m, c in enumerate(pr.coefficients) if m != level]
    return float(math.hypot(max(other, default=0.0), pr.residual))


def i_k_frame(spec: FieldSpec, emb, F: fock.FockVector, frame: str = "standard", regs=None) -> DualPolynomial:
    """I_K F with F in B-coordinates of F(T) and the result in W-coordinates.

    The H-side Fock vector is (KB)^{x n} F_n; a coefficient a_j of the Fourier
    image pulls back to (KW)^{x j})^{-1} a_j.  ``frame="standard"`` is
    transport.i_k.
    """
    KB, W = frame_maps(emb, frame)
    KW = emb.K @ W
    levels = tuple(fock.tensor_power_map(KB, j) @ x for j, x in enumerate(F.levels))
    p = fourier(spec, fock.FockVector(F.dim, F.cutoff, levels), regs=regs)
    coeffs = tuple(np.linalg.solve(fock.tensor_power_map(KW, j), a) for j, a in enumerate(p.coeffs))
    return DualPolynomial(p.dim, coeffs, "T")


def fourier_images(spec: FieldSpec, n: int, emb=None, frame: str = "standard") -> tuple:
    """Coefficient matrix (columns) of the Fourier images of all Fock basis
    vectors of degree <= n, with their degrees.  With ``emb`` these are
    i_k of the T-Fock basis of ``frame``."""
    d = spec.dim
    regs = regularity_operators(spec, n)
    cols, degs = [], []
    for j in range(n + 1):
        for alpha in fock.enumerate_basis(d, j):
            F = fock.FockVector.from_tensor(fock.SymTensor.basis_vector(alpha), n)
            if emb is None:
                p = fourier(spec, F, regs=regs)
            else:
                p = i_k_frame(spec, emb, F, frame, regs)
            cols.append(p.flat(n))
            degs.append(j)
    return np.array(cols).T, degs


def parseval_gram(spec: FieldSpec, n: int, emb=None, frame: str = "standard", gram=None) -> np.ndarray:
    """Exact-moment Gram of {fourier(E_alpha)} (or {i_k(E_alpha)}), |alpha| <= n."""
    X, _ = fourier_images(spec, n, emb, frame)
    G = monomial_gram(spec, n, emb, frame=frame) if gram is None else gram
    return X.T @ G @ X


def monomial_values(samples, labels) -> np.ndarray:
    """Monomials <x^{x j}, E_alpha> evaluated on sample rows; shape (count, len(labels))."""
    samples = np.atleast_2d(samples)
    d = samples.shape[1]
    cols = []
    n = max(sum(a) for a in labels)
    index = {}
    for j in range(n + 1):
        vals = pairing_vector(samples, j)
        for k, a in enumerate(fock.enumerate_basis(d, j)):
            index[a] = vals[:, k]
    for a in labels:
        cols.append(index[tuple(a)])
    return np.column_stack(cols)
