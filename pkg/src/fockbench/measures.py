"""Spectral measures, their images under K^+, and Monte Carlo estimators.

Random numbers come from Philox counter-based generators keyed by
SeedSequence(seed, spawn_key=(stream, chunk)).  A batch is cut into fixed-size
chunks, each with its own key, and chunks are concatenated in index order, so
a batch depends only on (seed, stream, count) and not on the worker count.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import DimensionError

CHUNK = 1 << 16


@dataclass(frozen=True)
class MeasureModel:
    kind: str  # "gaussian" | "poisson"
    dim: int
    weights: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "poisson"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "poisson":
            w = (1.0,) * self.dim if self.weights is None else tuple(float(x) for x in self.weights)
            if len(w) != self.dim:
                raise DimensionError(f"need {self.dim} intensities, got {len(w)}")
            if any(not x > 0 for x in w):
                raise ValueError(f"intensities must be positive, got {w}")
            object.__setattr__(self, "weights", w)

    @classmethod
    def for_field(cls, spec, seed: int = 0) -> "MeasureModel":
        kind = spec.base.kind if spec.kind == "conjugated" else spec.kind
        w = None if spec.weights is None else tuple(spec.weights)
        return cls(kind, spec.dim, w if kind == "poisson" else None, seed)


@dataclass
class SampleBatch:
    samples: np.ndarray  # rows are draws, columns functional coordinates
    provenance: str  # "rho" or "rho_K"
    seed: int
    stream: int
    embedding: object = field(default=None, repr=False)

    @property
    def count(self) -> int:
        return self.samples.shape[0]


def _generator(seed: int, stream: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _draw(model: MeasureModel, rng: np.random.Generator, count: int) -> np.ndarray:
    if model.kind == "gaussian":
        return rng.standard_normal((count, model.dim))
    w = np.asarray(model.weights)
    counts = rng.poisson(w, size=(count, model.dim))
    return (counts - w) / np.sqrt(w)


def sample(model: MeasureModel, count: int, stream: int = 0, workers: int = 1) -> SampleBatch:
    if count < 1:
        raise ValueError("count must be >= 1")
    sizes = [CHUNK] * (count // CHUNK)
    if count % CHUNK:
        sizes.append(count % CHUNK)

    def job(k):
        return _draw(model, _generator(model.seed, stream, k), sizes[k])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(k) for k in range(len(sizes))]
    return SampleBatch(np.concatenate(parts), "rho", model.seed, stream)


def pushforward(emb, batch: SampleBatch) -> SampleBatch:
    """Rowwise omega = K^T xi."""
    if batch.samples.shape[1] != emb.dim:
        raise DimensionError("batch and embedding dimensions differ")
    return SampleBatch(batch.samples @ emb.K, "rho_K", batch.seed, batch.stream, emb)


def charfun_closed(model: MeasureModel, phi, emb=None) -> complex:
    """Closed-form characteristic functional.  With ``emb`` this is the image
    measure rho_K evaluated at f = phi, i.e. rho^(K f)."""
    phi = np.asarray(phi, dtype=float)
    if emb is not None:
        phi = emb.K @ phi
    if phi.shape != (model.dim,):
        raise DimensionError(f"argument of shape {phi.shape} for a measure over d={model.dim}")
    if model.kind == "gaussian":
        return complex(math.exp(-0.5 * float(phi @ phi)))
    w = np.asarray(model.weights)
    u = phi / np.sqrt(w)
    return complex(np.exp(np.sum(w * (np.exp(1j * u) - 1 - 1j * u))))


@dataclass
class Estimate:
    value: complex | float
    stderr: float

    def within(self, target, n_se: float = 5.0) -> bool:
        return abs(self.value - target) <= n_se * self.stderr


def empirical_moments(batch: SampleBatch, fs, max_order: int) -> list:
    """Plug-in moments E[<x, f>^k], k = 1..max_order, for each f.

    Returns one list of Estimates per f; stderr is sample std / sqrt(count).
    """
    fs = np.atleast_2d(np.asarray(fs, dtype=float))
    if fs.size == 0:
        raise ValueError("empty list of test vectors")
    if batch.count < 2:
        raise ValueError("need at least two samples for a standard error")
    if max_order > 8:
        warnings.warn(f"moment order {max_order} > 8: Monte Carlo estimate is unstable", RuntimeWarning, stacklevel=2)
    s = batch.samples @ fs.T  # (count, n_f)
    out = []
    for col in s.T:
        row = []
        p = np.ones_like(col)
        for _ in range(max_order):
            p = p * col
            row.append(Estimate(float(p.mean()), float(p.std(ddof=1) / math.sqrt(batch.count))))
        out.append(row)
    return out


def empirical_charfun(batch: SampleBatch, f) -> Estimate:
    f = np.asarray(f, dtype=float)
    if f.size == 0:
        raise ValueError("empty test vector")
    z = np.exp(1j * (batch.samples @ f))
    m = z.mean()
    se = math.sqrt(float(np.mean(np.abs(z - m) ** 2)) * batch.count / (batch.count - 1) / batch.count)
    return Estimate(complex(m), se)


def empirical_covariance(batch: SampleBatch):
    """Sample covariance with entrywise standard errors."""
    X = batch.samples - batch.samples.mean(axis=0)
    n = batch.count
    cov = X.T @ X / (n - 1)
    prods = X[:, :, None] * X[:, None, :]
    se = prods.std(axis=0, ddof=1) / math.sqrt(n)
    return cov, se


# -- independent moment oracles (no operator calculus involved) --------------

def gaussian_moment(n: int, variance: float = 1.0) -> float:
    """E[Z^n] for Z ~ N(0, variance): (n-1)!! variance^{n/2}."""
    if n % 2:
        return 0.0
    return variance ** (n // 2) * math.prod(range(n - 1, 0, -2))


def poisson_central_moment(n: int, lam: float = 1.0) -> float:
    """E[(N - lam)^n] for N ~ Poisson(lam), by direct summation of the pmf."""
    # tail beyond lam + 40 sqrt(lam) + 10 n is far below double precision
    kmax = int(lam + 40 * math.sqrt(lam) + 10 * n + 50)
    k = np.arange(kmax + 1)
    return float(np.sum(stats.poisson.pmf(k, lam) * (k - lam) ** n))


def _moments_from_cumulants(kappa: list, n_max: int) -> list:
    m = [1.0]
    for n in range(1, n_max + 1):
        m.append(sum(math.comb(n - 1, k - 1) * kappa[k] * m[n - k] for k in range(1, n + 1)))
    return m


def linear_moments(model: MeasureModel, phi, n_max: int) -> list:
    """E[<xi, phi>^n], n = 0..n_max, from the cumulants of the product measure."""
    phi = np.asarray(phi, dtype=float)
    kappa = [0.0] * (n_max + 1)
    if model.kind == "gaussian":
        if n_max >= 2:
            kappa[2] = float(phi @ phi)
    else:
        w = np.asarray(model.weights)
        for k in range(2, n_max + 1):
            kappa[k] = float(np.sum(w * (phi / np.sqrt(w)) ** k))
    return _moments_from_cumulants(kappa, n_max)
