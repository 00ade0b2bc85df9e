"""Gaussian kernel density estimation of the swarm density on a grid."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, integrate

__all__ = [
    "KdeConfig",
    "DensityEstimate",
    "kernel_sum",
    "raw_grid_estimate",
    "estimate_density",
    "estimation_error",
]

BOUNDARY_CORRECTIONS = ("renormalize", "reflect")


@dataclass(frozen=True)
class KdeConfig:
    """Estimator settings.

    ``truncation_radius`` is measured in bandwidths; kernel contributions from
    agents farther than ``truncation_radius * bandwidth`` from a cell center
    are dropped. ``floor`` is added to every cell before the final
    renormalization so the estimate is bounded away from zero.
    """

    bandwidth: float = 0.045
    truncation_radius: float = 4.0
    boundary_correction: str = "renormalize"
    floor: float = 1e-12

    def __post_init__(self) -> None:
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.truncation_radius >= 3:
            raise ValueError(f"truncation_radius must be >= 3, got {self.truncation_radius}")
        if self.boundary_correction not in BOUNDARY_CORRECTIONS:
            raise ValueError(f"boundary_correction must be one of {BOUNDARY_CORRECTIONS}")
        if not self.floor > 0:
            raise ValueError("floor must be positive")


@dataclass(frozen=True)
class DensityEstimate:
    field: ScalarField
    config: KdeConfig
    n_samples: int

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def grid(self) -> Grid:
        return self.field.grid


def _check_positions(positions: np.ndarray, dim: int) -> np.ndarray:
    pos = np.asarray(positions, dtype=float).reshape(-1, dim)
    if len(pos) == 0:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(pos)) or np.any(pos < 0.0) or np.any(pos > 1.0):
        raise ValueError("sample positions must lie in the closed unit box")
    return pos


def kernel_sum(points: np.ndarray, positions: np.ndarray, h: float, chunk: int = 4096) -> np.ndarray:
    """Untruncated estimator ``1/(N h^n) sum_i K((x - X_i)/h)`` at arbitrary points.

    Dense O(M N) evaluation; used for point queries and as a reference for
    the bucketed grid evaluation.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim = points.shape[1]
    positions = np.asarray(positions, dtype=float).reshape(-1, dim)
    n = len(positions)
    norm = 1.0 / (n * h**dim * (2.0 * math.pi) ** (dim / 2))
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        d2 = np.sum(((block[:, None, :] - positions[None, :, :]) / h) ** 2, axis=-1)
        out[start : start + chunk] = np.exp(-0.5 * d2).sum(axis=1)
    return out * norm


def _reflected_images(pos: np.ndarray, reach: float) -> np.ndarray:
    """Mirror images of samples lying within ``reach`` of a boundary face."""
    dim = pos.shape[1]
    options = []
    for k in range(dim):
        x = pos[:, k]
        options.append([(x, np.ones(len(x), bool)), (-x, x < reach), (2.0 - x, x > 1.0 - reach)])
    images = []
    for combo in itertools.product(range(3), repeat=dim):
        if all(c == 0 for c in combo):
            continue
        mask = np.ones(len(pos), bool)
        coords = []
        for k, c in enumerate(combo):
            coord, m = options[k][c]
            coords.append(coord)
            mask &= m
        if mask.any():
            images.append(np.stack(coords, axis=1)[mask])
    if not images:
        return np.empty((0, dim))
    return np.concatenate(images)


def _bucketed_sum(grid: Grid, samples: np.ndarray, h: float, radius: float) -> np.ndarray:
    """Sum of unnormalized Gaussian weights over cells within ``radius * h``.

    Each sample only visits the window of cells around its own cell. Weights
    are accumulated into a grid padded by the window half-width, which also
    absorbs samples (mirror images) lying outside the box; the pad is cropped.
    """
    dim = grid.dim
    cells = np.array(grid.cells)
    widths = np.array(grid.widths)
    half = np.ceil(radius * h / widths).astype(int) + 1
    padded = tuple(int(n + 2 * w) for n, w in zip(cells, half))
    acc = np.zeros(int(np.prod(padded)))
    window = int(np.prod(2 * half + 1))
    # bound the temporary (samples x window) arrays
    chunk = max(1, 1_000_000 // window)
    for start in range(0, len(samples), chunk):
        pos = samples[start : start + chunk]
        flat = np.zeros((len(pos),) + (1,) * dim, dtype=np.int64)
        d2 = np.zeros((len(pos),) + (1,) * dim)
        for k in range(dim):
            off = np.arange(-half[k], half[k] + 1)
            base = np.clip(np.floor(pos[:, k] / widths[k]).astype(np.int64), 0, cells[k] - 1)
            idx = base[:, None] + off[None, :]
            dk = (((idx + 0.5) * widths[k] - pos[:, k : k + 1]) / h) ** 2
            shape = [len(pos)] + [1] * dim
            shape[k + 1] = len(off)
            stride = int(np.prod(padded[k + 1 :]))
            flat = flat + ((idx + half[k]) * stride).reshape(shape)
            d2 = d2 + dk.reshape(shape)
        w = np.where(d2 <= radius**2, np.exp(-0.5 * d2), 0.0)
        acc += np.bincount(flat.ravel(), weights=w.ravel(), minlength=acc.size)
    crop = tuple(slice(w, w + n) for w, n in zip(half, cells))
    return acc.reshape(padded)[crop]


def raw_grid_estimate(positions: np.ndarray, grid: Grid, config: KdeConfig) -> np.ndarray:
    """Truncated kernel sum at cell centers, before any boundary correction."""
    pos = _check_positions(positions, grid.dim)
    h = config.bandwidth
    norm = 1.0 / (len(pos) * h**grid.dim * (2.0 * math.pi) ** (grid.dim / 2))
    return norm * _bucketed_sum(grid, pos, h, config.truncation_radius)


def estimate_density(positions: np.ndarray, grid: Grid, config: KdeConfig = KdeConfig()) -> DensityEstimate:
    """Estimate the swarm density at every cell center.

    Steps: truncated kernel sum; boundary correction (``renormalize`` divides
    by the captured mass, ``reflect`` adds mirror images of samples near the
    walls and then renormalizes); additive positivity floor; final
    renormalization to unit mass.
    """
    pos = _check_positions(positions, grid.dim)
    h = config.bandwidth
    raw = raw_grid_estimate(pos, grid, config)
    if config.boundary_correction == "reflect":
        images = _reflected_images(pos, config.truncation_radius * h)
        if len(images):
            norm = 1.0 / (len(pos) * h**grid.dim * (2.0 * math.pi) ** (grid.dim / 2))
            raw = raw + norm * _bucketed_sum(grid, images, h, config.truncation_radius)
    mass = raw.sum() * grid.cell_volume
    if mass > 0:
        raw = raw / mass
    values = raw + config.floor
    values = values / (values.sum() * grid.cell_volume)
    return DensityEstimate(ScalarField(grid, values), config, len(pos))


def estimation_error(p_hat: ScalarField | DensityEstimate, p_ref: ScalarField) -> ScalarField:
    """Relative estimation error ``p_hat / p_ref - 1``."""
    if isinstance(p_hat, DensityEstimate):
        p_hat = p_hat.field
    if p_hat.grid != p_ref.grid:
        raise ValueError("grid mismatch")
    if np.any(p_ref.values <= 0):
        raise ValueError("reference density must be strictly positive")
    return ScalarField(p_ref.grid, p_hat.values / p_ref.values - 1.0)


def check_normalized(f: ScalarField, tol: float = 1e-8) -> None:
    mass = integrate(f)
    if abs(mass - 1.0) > tol:
        raise ValueError(f"density integrates to {mass}, expected 1")
