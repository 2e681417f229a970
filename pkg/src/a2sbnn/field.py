"""Spatial grid and the fixed heavy-tailed target field."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DomainError
from .stats import RngStream, cholesky, sample_student_t

FIELD_STREAM = 11
NOISE_STREAM = 12


@dataclass(frozen=True)
class SpatialGrid:
    side: int
    coords: np.ndarray  # (side*side, 2), row-major: row index is the y-axis

    @property
    def size(self) -> int:
        return self.side * self.side


@dataclass(frozen=True)
class FieldConfig:
    kernel_variance: float = 1.0
    length_scale: float = 0.2
    t_dof: float = 3.0
    noise_scale: float = 0.05
    jitter: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for name in ("kernel_variance", "length_scale", "t_dof"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.noise_scale < 0 or self.jitter < 0:
            raise DomainError("noise_scale and jitter must be non-negative")


@dataclass(frozen=True)
class TargetField:
    grid: SpatialGrid
    values: np.ndarray
    raw: np.ndarray | None = None  # pre-normalization values

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.grid.side, self.grid.side)


def make_grid(side: int) -> SpatialGrid:
    if side < 2:
        raise DomainError(f"grid side must be >= 2, got {side}")
    ticks = np.linspace(0.0, 1.0, side)
    yy, xx = np.meshgrid(ticks, ticks, indexing="ij")
    # point k = (row, col) -> (x=ticks[row], y=ticks[col]) keeps (0,0),(0,1),(1,0),(1,1) order
    coords = np.column_stack([yy.ravel(), xx.ravel()])
    return SpatialGrid(side=side, coords=coords)


def se_covariance(grid: SpatialGrid, sigma2: float, ell: float) -> np.ndarray:
    """C_ij = sigma2 * exp(-|x_i - x_j|^2 / (2 ell^2))."""
    if not (sigma2 > 0 and ell > 0):
        raise DomainError("sigma2 and ell must be positive")
    return kernels.sq_exp_cov(np.ascontiguousarray(grid.coords), float(sigma2), float(ell))


def minmax(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def synthesize_target(grid: SpatialGrid, cfg: FieldConfig) -> TargetField:
    cov = se_covariance(grid, cfg.kernel_variance, cfg.length_scale)
    L = cholesky(cov, cfg.jitter)
    z = RngStream(cfg.seed, FIELD_STREAM).normal(grid.size)
    f = L @ z
    if cfg.noise_scale > 0:
        f = f + cfg.noise_scale * sample_student_t(RngStream(cfg.seed, NOISE_STREAM), cfg.t_dof, grid.size)
    return TargetField(grid=grid, values=minmax(f), raw=f)


def write_field_csv(path, values: np.ndarray, side: int) -> None:
    """One CSV row per grid row, 17 significant digits, header ``c0..c{side-1}``."""
    img = np.asarray(values, dtype=np.float64).reshape(side, side)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"c{j}" for j in range(side)])
        for row in img:
            w.writerow([format(v, ".17g") for v in row])


def read_field_csv(path) -> np.ndarray:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
