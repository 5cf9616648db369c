"""Transport of a Jacobi field along an injective embedding K : T_+ -> H_+.

Coordinates used on the T side:

* "standard" coordinates: the canonical basis eps_i of R^d.  Its symmetric
  powers E_alpha^eps are orthonormal for the dot product but *not* for the
  T inner product (f, g)_T = (Kf) . (Kg).
* the pullback basis t_i = K^{-1} e_i, which is T-orthonormal.  In it the
  unitary calK = (+)_n Kbar^{x n} is the coordinate identity.  Fock vectors
  over T are stored in this basis.
* an SVD frame tau_i = V Sigma^{-1} e_i (K = U Sigma V^T), also T-orthonormal,
  in which Kbar is the orthogonal matrix U.  The two constructions of J_K are
  compared here by default.
* functional coordinates on T_- (omega . f is the pairing), so K^+ = K^T.

The standard-coordinate matrices S_n = tensor_power_map(K, n) are kept too; in
that frame inverting S_n costs about cond(K)^n in accuracy, so it is only
reliable for well-conditioned K or small cutoffs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from . import fock
from .errors import ConsistencyError, DimensionError, SingularEmbeddingError, TruncationError
from .fields import FieldSpec, assemble_operator
from .spectral import DualPolynomial, eigenvector, fourier


@dataclass(frozen=True)
class Embedding:
    K: np.ndarray

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            # injective with dense range forces a square K at finite dimension
            raise DimensionError(f"K must be square, got shape {K.shape}")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)
        s = self.singular_values
        if s[-1] <= s[0] * K.shape[0] * np.finfo(float).eps or s[-1] == 0.0:
            raise SingularEmbeddingError(
                f"K is not injective: smallest singular value {s[-1]:.3e} (largest {s[0]:.3e})"
            )

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.K, compute_uv=False)

    @property
    def condition_number(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1])

    @cached_property
    def gram_T(self) -> np.ndarray:
        return self.K.T @ self.K

    @cached_property
    def t_basis(self) -> np.ndarray:
        """Columns t_i = K^{-1} e_i in standard coordinates."""
        return np.linalg.solve(self.K, np.eye(self.dim))

    def inner_T(self, f, g) -> float:
        return float(np.asarray(f) @ self.gram_T @ np.asarray(g))

    def riesz_T(self, omega) -> np.ndarray:
        """Element g of T with (g, f)_T = <omega, f>_T for all f."""
        return np.linalg.solve(self.gram_T, np.asarray(omega).T).T

    @classmethod
    def identity(cls, d: int) -> "Embedding":
        return cls(np.eye(d))


def k_plus(emb: Embedding, xi) -> np.ndarray:
    """K^+ in functional coordinates: omega = K^T xi (rows of a batch are mapped)."""
    xi = np.asarray(xi)
    if xi.shape[-1] != emb.dim:
        raise DimensionError(f"xi of dimension {xi.shape[-1]} for K of size {emb.dim}")
    return xi @ emb.K


@dataclass
class BigK:
    """calK truncated at ``cutoff``, in three coordinate systems on F(T).

    ``levels``: t-basis -> e-basis, the identity at every level.
    ``standard``: eps-basis -> e-basis, S_n = K^{x n}; ``metric`` holds the
    T-Gram matrices G_n = (K^T K)^{x n} of the eps basis.
    ``orthonormal``: SVD frame tau_i = V Sigma^{-1} e_i (K = U Sigma V^T) ->
    e-basis, R_n = U^{x n}.  tau is T-orthonormal and R_n is orthogonal, so this
    frame carries no cond(K)^n amplification.
    """

    cutoff: int
    dim: int
    levels: list
    standard: list
    metric: list = field(repr=False)
    orthonormal: list = field(repr=False)
    frame_basis: np.ndarray = field(repr=False)

    def unitarity_residual(self, frame: str = "standard") -> float:
        """max_n || calK_n^* calK_n - Id ||, the adjoint taken in the T metric."""
        res = 0.0
        for M, G in zip(*self._frame(frame)):
            adj = np.linalg.solve(G, M.T)
            res = max(res, float(np.abs(adj @ M - np.eye(M.shape[1])).max()))
        return res

    def _frame(self, frame):
        if frame == "standard":
            return self.standard, self.metric
        if frame == "orthonormal":
            return self.orthonormal, [np.eye(m.shape[0]) for m in self.orthonormal]
        if frame == "t":
            return self.levels, [np.eye(m.shape[0]) for m in self.levels]
        raise ValueError(f"unknown frame {frame!r}")

    def block_diag(self, frame: str = "standard") -> np.ndarray:
        return sla.block_diag(*self._frame(frame)[0])


def big_k(emb: Embedding, N: int) -> BigK:
    d = emb.dim
    U, s, Vt = np.linalg.svd(emb.K)
    standard = [fock.tensor_power_map(emb.K, n) for n in range(N + 1)]
    metric = [fock.tensor_power_map(emb.gram_T, n) for n in range(N + 1)]
    ortho = [fock.tensor_power_map(U, n) for n in range(N + 1)]
    levels = [np.eye(fock.level_dim(d, n)) for n in range(N + 1)]
    return BigK(N, d, levels, standard, metric, ortho, Vt.T / s)


def conjugated_field(spec: FieldSpec, emb: Embedding, check_cutoff: int = 3, atol: float = 1e-10, seed: int = 0) -> FieldSpec:
    """The family J_K(f) = calK^{-1} J(Kf) calK, in the t-basis of F(T).

    With finite-dimensional invertible K the blocks automatically preserve
    the tensor powers of ran(K), which is all the construction needs.  Both constructions of J_K are compared on a few probe
    vectors before the field is returned.
    """
    if emb.dim != spec.dim:
        raise DimensionError(f"K of size {emb.dim} for a field over d={spec.dim}")
    K = emb.K

    def a_block(f, n):
        return spec.a_block(K @ np.asarray(f), n)

    def b_block(f, n):
        return spec.b_block(K @ np.asarray(f), n)

    out = FieldSpec(spec.dim, "conjugated", a_block, b_block, weights=spec.weights, base=spec, embedding=emb)
    rng = np.random.default_rng(seed)
    bigk = big_k(emb, check_cutoff)
    for f in rng.normal(size=(2, spec.dim)):
        a = jk_matrix(spec, emb, f, check_cutoff, "conjugation", bigk=bigk)
        b = jk_matrix(spec, emb, f, check_cutoff, "blocks", bigk=bigk)
        gap = float(np.abs(a - b).max())
        if gap > atol * max(1.0, float(np.abs(a).max())):
            raise ConsistencyError(f"J_K constructions disagree by {gap:.3e}")
    return out


def _dense(m):
    return m.toarray() if hasattr(m, "toarray") else np.asarray(m)


def jk_matrix(spec: FieldSpec, emb: Embedding, f, N: int, method: str = "blocks", frame: str = "orthonormal", bigk: BigK | None = None) -> np.ndarray:
    """J_K(f) on F(T) truncated at N, in the coordinates of ``frame``.

    ``method="conjugation"``: calK^{-1} J(Kf) calK with calK the block-diagonal
    matrix of Kbar^{x n} in that frame.
    ``method="blocks"``: alpha_n = (Kbar^{x(n+1)})^{-1} a_n(Kf) Kbar^{x n},
    beta_n = (Kbar^{x n})^{-1} b_n(Kf) Kbar^{x n}, and alpha_n^* the adjoint in the
    T metric of the frame, G_n^{-1} alpha_n^H G_{n+1}.

    In the standard frame both routes lose about cond(K)^N in accuracy.
    """
    f = spec.check_vector(f)
    bigk = big_k(emb, N) if bigk is None else bigk
    if bigk.cutoff < N:
        raise TruncationError(f"BigK built for cutoff {bigk.cutoff} < {N}")
    maps, metric = bigk._frame(frame)
    maps, metric = maps[: N + 1], metric[: N + 1]
    Kf = emb.K @ f
    if method == "conjugation":
        J = assemble_operator(spec, Kf, N).matrix
        calK = sla.block_diag(*maps)
        return np.linalg.solve(calK, J @ calK)
    if method != "blocks":
        raise ValueError(f"unknown method {method!r}")
    dims = [fock.level_dim(spec.dim, n) for n in range(N + 1)]
    rows = [[np.zeros((dims[n], dims[m])) for m in range(N + 1)] for n in range(N + 1)]
    for n in range(N + 1):
        rows[n][n] = np.linalg.solve(maps[n], _dense(spec.b_block(Kf, n)) @ maps[n])
    for n in range(N):
        alpha = np.linalg.solve(maps[n + 1], _dense(spec.a_block(Kf, n)) @ maps[n])
        rows[n + 1][n] = alpha
        rows[n][n + 1] = np.linalg.solve(metric[n], alpha.conj().T @ metric[n + 1])
    return np.block(rows)


def construction_gap(spec: FieldSpec, emb: Embedding, f, N: int, frame: str = "orthonormal") -> float:
    bigk = big_k(emb, N)
    a = jk_matrix(spec, emb, f, N, "conjugation", frame, bigk)
    b = jk_matrix(spec, emb, f, N, "blocks", frame, bigk)
    return float(np.abs(a - b).max())


def jk_power_moments(spec: FieldSpec, emb: Embedding, f, n_max: int, method: str = "blocks", frame: str = "orthonormal") -> np.ndarray:
    """[<J_K(f)^k Omega, Omega>_T for k = 0..n_max] from the matrix of ``jk_matrix``.

    The vacuum is the first coordinate in every frame and level 0 of every
    T metric is the scalar 1.
    """
    M = jk_matrix(spec, emb, f, max(n_max, 0), method, frame)
    v = np.zeros(M.shape[0])
    v[0] = 1.0
    out = [1.0]
    for _ in range(n_max):
        v = M @ v
        out.append(float(v[0]))
    return np.array(out)


def pullback_u(emb: Embedding, q: DualPolynomial) -> DualPolynomial:
    """(Uq)(xi) = q(K^+ xi); on coefficients c_j -> K^{x j} c_j."""
    if q.space != "T":
        raise ValueError("pullback_u expects a polynomial on T_-")
    if q.dim != emb.dim:
        raise DimensionError("polynomial and embedding dimensions differ")
    coeffs = tuple(fock.tensor_power_map(emb.K, j) @ c for j, c in enumerate(q.coeffs))
    return DualPolynomial(q.dim, coeffs, "H")


def pullback_u_inverse(emb: Embedding, p: DualPolynomial, rtol: float = 1e-10) -> DualPolynomial:
    """U^{-1} on polynomials: a_j -> (K^{x j})^{-1} a_j."""
    if p.space != "H":
        raise ValueError("pullback_u_inverse expects a polynomial on H_-")
    coeffs = []
    for j, a in enumerate(p.coeffs):
        S = fock.tensor_power_map(emb.K, j)
        c, *_ = np.linalg.lstsq(S, a, rcond=None)
        if np.linalg.norm(S @ c - a) > rtol * max(1.0, np.linalg.norm(a)):
            raise SingularEmbeddingError(f"degree-{j} coefficient is not in the range of K^(x{j})")
        coeffs.append(c)
    return DualPolynomial(p.dim, tuple(coeffs), "T")


def i_k(spec: FieldSpec, emb: Embedding, F: fock.FockVector, regs=None) -> DualPolynomial:
    """I_K F = U^{-1} I calK F for F in t-basis coordinates of F(T)."""
    if F.dim != emb.dim:
        raise DimensionError("Fock vector and embedding dimensions differ")
    # calK is the coordinate identity from the t-basis to the e-basis
    KF = fock.FockVector(F.dim, F.cutoff, tuple(F.levels))
    return pullback_u_inverse(emb, fourier(spec, KF, regs=regs))


def q_eigenvector(spec: FieldSpec, emb: Embedding, xi, N: int, regs=None) -> list:
    """Q_n(K^+ xi) = (K^T)^{x n} P_n(xi), in functional coordinates on T_-."""
    P = eigenvector(spec, xi, N, regs=regs)
    return [fock.tensor_power_map(emb.K.T, n) @ p for n, p in enumerate(P)]


def q_eigenvector_residual(spec: FieldSpec, emb: Embedding, xi, Q, f, bigk: BigK | None = None) -> float:
    """Relative residual of <Q(omega), J_K(f) F>_T = <omega, f>_T <Q(omega), F>_T.

    F runs over the standard basis of degrees <= N-1; J_K(f) is the
    standard-coordinate matrix from the entry formulas.
    """
    N = len(Q) - 1
    f = np.asarray(f)
    omega = k_plus(emb, xi)
    M = jk_matrix(spec, emb, f, N, "blocks", "standard", bigk)
    q = np.concatenate(Q)
    safe = fock.level_offsets(emb.dim, N)[N]
    lhs = (M.T @ q)[:safe]
    rhs = float(omega @ f) * q[:safe]
    scale = np.abs(lhs).max(initial=0.0) + np.abs(rhs).max(initial=0.0)
    return float(np.abs(lhs - rhs).max(initial=0.0) / max(scale, 1e-300))


def jk_commutator_norm(spec: FieldSpec, emb: Embedding, f, g, N: int) -> float:
    """Frobenius norm of [J_K(f), J_K(g)] on degrees <= N-2, in the t-basis."""
    if N < 2:
        raise TruncationError("commutator check needs cutoff >= 2")
    conj = conjugated_field(spec, emb)
    A = assemble_operator(conj, f, N).sparse
    B = assemble_operator(conj, g, N).sparse
    safe = fock.level_offsets(spec.dim, N)[N - 1]
    C = A @ B[:, :safe] - B @ A[:, :safe]
    return float(np.sqrt(abs(C.multiply(C.conj()).sum())))
