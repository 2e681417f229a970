"""A2 copula inverse generator and the copula-driven weight initializer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, NumericError, ShapeError
from .stats import RngStream, inv_normal_cdf


@dataclass(frozen=True)
class A2Params:
    """Initializer constants; ``theta`` controls tail-dependence intensity."""

    theta: float
    scale: float = 4.0
    clip_epsilon: float = 1e-3
    clamp_lo: float = 1e-9
    clamp_hi: float = 1.0 - 1e-9

    def __post_init__(self):
        if not self.theta >= 1.0:
            raise DomainError(f"theta must be >= 1, got {self.theta}")
        if not 0.0 < self.clamp_lo < self.clamp_hi < 1.0:
            raise DomainError("need 0 < clamp_lo < clamp_hi < 1")
        if not self.clip_bound > 0.0:
            raise DomainError("clip_epsilon leaves no room below 0.25/sqrt(theta)")

    @property
    def bound(self) -> float:
        return 0.25 / math.sqrt(self.theta)

    @property
    def clip_bound(self) -> float:
        """Largest admissible |w|: the bound shrunk by epsilon."""
        return self.bound - self.clip_epsilon


def inv_generator(t, theta: float, clamp_lo: float = 1e-9, clamp_hi: float = 1.0 - 1e-9):
    """phi^{-1}(t; theta) = (2 + t^(1/theta) - sqrt((2 + t^(1/theta))^2 - 4)) / 2.

    ``t`` is clamped to ``[clamp_lo, clamp_hi]`` after checking it lies in [0, 1].
    """
    if not theta >= 1.0:
        raise DomainError(f"theta must be >= 1, got {theta}")
    arr = np.asarray(t, dtype=np.float64)
    if arr.size and not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
        raise DomainError("t must lie in [0, 1]")
    clamped = np.clip(arr, clamp_lo, clamp_hi).ravel()
    out = kernels.a2_inv_generator(np.ascontiguousarray(clamped), float(theta)).reshape(arr.shape)
    if out.ndim == 0:
        return float(out)
    return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def init_weights(rng: RngStream, shape: tuple[int, int], params: A2Params) -> np.ndarray:
    fan_out, fan_in = shape
    if fan_out < 1 or fan_in < 1:
        raise ShapeError(f"weight shape must be positive, got {shape}")
    n = fan_out * fan_in
    t = np.clip(rng.uniform(n), params.clamp_lo, params.clamp_hi)
    v = params.scale * inv_generator(t, params.theta, params.clamp_lo, params.clamp_hi)
    sd = v.std()
    if not sd > 0.0:
        raise NumericError("copula-transformed sample has zero variance")
    u = _sigmoid((v - v.mean()) / sd)
    # keep the probit argument strictly inside (0, 1)
    u = np.clip(u, params.clamp_lo, params.clamp_hi)
    w = inv_normal_cdf(u)
    b = params.clip_bound
    return np.clip(w, -b, b).reshape(fan_out, fan_in)


def init_bias(fan_out: int) -> np.ndarray:
    if fan_out < 1:
        raise ShapeError(f"bias length must be >= 1, got {fan_out}")
    return np.zeros(fan_out)
