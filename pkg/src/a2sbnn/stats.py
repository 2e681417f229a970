"""Statistical and linear-algebra primitives: RNG streams, probit, Cholesky,
correlation/error metrics, exact 1-D Wasserstein distance and histograms."""

from __future__ import annotations

import logging

import numpy as np

from . import kernels
from .errors import DegenerateInputError, DomainError, NumericError, ShapeError

log = logging.getLogger(__name__)


class RngStream:
    """Counter-based (Philox) random stream keyed by ``(seed, stream_id)``.

    Distinct stream ids from the same seed are independent substreams, so
    parallel runs never share generator state. Not thread-safe; use one
    stream per task.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise DomainError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size) -> np.ndarray:
        return self.gen.random(size)

    def normal(self, size) -> np.ndarray:
        return self.gen.standard_normal(size)

    def chisquare(self, df: float, size) -> np.ndarray:
        return self.gen.chisquare(df, size)

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` distinct indices from ``range(n)``."""
        return self.gen.choice(n, size=size, replace=False)


def inv_normal_cdf(p):
    """Standard normal quantile, accurate to ~1e-15 absolute.

    Accepts a scalar or an array; every entry must lie in the open interval (0, 1).
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.size and not (np.all(arr > 0.0) and np.all(arr < 1.0)):
        raise DomainError("inv_normal_cdf requires 0 < p < 1")
    out = kernels.ndtri(np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    if out.ndim == 0:
        return float(out)
    return out


def sample_student_t(rng: RngStream, nu: float, n: int) -> np.ndarray:
    """i.i.d. Student-t(nu) draws built as z / sqrt(chi2_nu / nu)."""
    if not nu > 0:
        raise DomainError(f"degrees of freedom must be positive, got {nu}")
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    z = rng.normal(n)
    chi2 = rng.chisquare(nu, n)
    return z / np.sqrt(chi2 / nu)


def _as_square_symmetric(c) -> np.ndarray:
    c = np.ascontiguousarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {c.shape}")
    if np.max(np.abs(c - c.T), initial=0.0) > 1e-12:
        raise ShapeError("matrix is not symmetric within 1e-12")
    return c


def cholesky(c, jitter: float = 0.0, retries: int = 3) -> np.ndarray:
    """Lower Cholesky factor of ``c + jitter*I``.

    On failure the jitter is multiplied by 10 and the factorization retried,
    at most ``retries`` times. A zero starting jitter escalates from
    ``1e-10 * mean(diag)``. Escalations are logged at WARNING level.
    """
    c = _as_square_symmetric(c)
    if jitter < 0:
        raise DomainError("jitter must be non-negative")
    L = kernels.cholesky_lower(c, float(jitter))
    attempt = 0
    j = float(jitter)
    while L is None and attempt < retries:
        attempt += 1
        j = j * 10.0 if j > 0 else 1e-10 * max(float(np.mean(np.abs(np.diag(c)))), 1.0)
        log.debug("cholesky failed; retrying with jitter %.3g", j)
        L = kernels.cholesky_lower(c, j)
    if L is None:
        raise NumericError(f"matrix not positive definite after {retries} jitter retries")
    if j != jitter:
        log.warning("cholesky needed jitter escalation to %.3g", j)
    return L


def _pair(a, b, min_len: int):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ShapeError(f"need at least {min_len} values, got {a.size}")
    return a, b


def pearson(a, b) -> float:
    a, b = _pair(a, b, 2)
    da = a - a.mean()
    db = b - b.mean()
    sa = np.sqrt(np.dot(da, da))
    sb = np.sqrt(np.dot(db, db))
    if sa == 0.0 or sb == 0.0:
        raise DegenerateInputError("pearson correlation undefined for a constant vector")
    r = np.dot(da, db) / (sa * sb)
    return float(min(1.0, max(-1.0, r)))


def rmse(a, b) -> float:
    a, b = _pair(a, b, 1)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def wasserstein1_exact(a, b) -> float:
    """Exact empirical W1 between equal-size 1-D samples."""
    a, b = _pair(a, b, 1)
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def histogram(x, bins: int):
    """Equal-width histogram over ``[min, max]`` with the last bin closed.

    A zero-width range puts every value in the first bin of a unit-width span.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise DomainError("histogram of empty input")
    if bins < 1:
        raise DomainError("bins must be >= 1")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        edges = lo - 0.5 + np.arange(bins + 1) / bins
        counts = np.zeros(bins, dtype=np.int64)
        counts[0] = x.size
        return edges, counts
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return edges, counts
