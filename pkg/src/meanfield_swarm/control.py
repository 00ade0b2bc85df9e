"""Density feedback velocity laws.

The law maps a (true or estimated) density ``p`` to

    v = -(alpha * grad(p - p_target) - grad(sigma * p)) / p

so that, substituted into the Fokker-Planck equation, the deviation
``p - p_target`` obeys a diffusion equation with coefficient ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import ScalarField, VectorField, diff_axis, integrate
from .kde import DensityEstimate

__all__ = [
    "ControlConfig",
    "velocity_from_true_density",
    "velocity_from_estimate",
    "face_velocities",
]

Coefficient = Union[float, ScalarField]


@dataclass(frozen=True)
class ControlConfig:
    """Target density, gains and optional per-component velocity cap.

    ``alpha`` and ``sigma`` may be constants or fields on the target's grid.
    """

    target: ScalarField
    alpha: Coefficient = 0.03
    sigma: Coefficient = 0.0005
    velocity_cap: float | None = 5.0

    def __post_init__(self) -> None:
        t = self.target.values
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ValueError("target density must be finite and strictly positive")
        mass = integrate(self.target)
        if abs(mass - 1.0) > 1e-8:
            raise ValueError(f"target density integrates to {mass}, expected 1")
        a = self.alpha_values()
        if not np.all(np.isfinite(a)) or a.min() <= 0:
            raise ValueError("alpha must be finite and bounded away from zero")
        s = self.sigma_values()
        if not np.all(np.isfinite(s)) or s.min() < 0:
            raise ValueError("sigma must be finite and nonnegative")
        if self.velocity_cap is not None and not self.velocity_cap > 0:
            raise ValueError("velocity_cap must be positive or None")

    @property
    def grid(self):
        return self.target.grid

    def _coef(self, c: Coefficient) -> np.ndarray:
        if isinstance(c, ScalarField):
            if c.grid != self.grid:
                raise ValueError("coefficient field lives on a different grid than the target")
            return c.values
        return np.full(self.grid.shape, float(c))

    def alpha_values(self) -> np.ndarray:
        return self._coef(self.alpha)

    def sigma_values(self) -> np.ndarray:
        return self._coef(self.sigma)


def _feedback_velocity(p: np.ndarray, cfg: ControlConfig) -> VectorField:
    grid = cfg.grid
    phi = p - cfg.target.values
    sp = cfg.sigma_values() * p
    alpha = cfg.alpha_values()
    comps = []
    for k, h in enumerate(grid.widths):
        num = alpha * diff_axis(phi, h, k, "even") - diff_axis(sp, h, k, "even")
        v = -num / p
        if cfg.velocity_cap is not None:
            v = np.clip(v, -cfg.velocity_cap, cfg.velocity_cap)
        comps.append(v)
    return VectorField(grid, tuple(comps))


def _check_grid(f: ScalarField, cfg: ControlConfig) -> None:
    if f.grid != cfg.grid:
        raise ValueError("density and target live on different grids")


def velocity_from_true_density(p: ScalarField, cfg: ControlConfig) -> VectorField:
    """Feedback law driven by the exact density; ``p`` must be strictly positive."""
    _check_grid(p, cfg)
    if np.any(p.values <= 0):
        raise ValueError("feedback law divides by the density; got a nonpositive cell")
    return _feedback_velocity(p.values, cfg)


def velocity_from_estimate(p_hat: DensityEstimate | ScalarField, cfg: ControlConfig) -> VectorField:
    """Feedback law driven by a density estimate (positive by construction)."""
    field = p_hat.field if isinstance(p_hat, DensityEstimate) else p_hat
    _check_grid(field, cfg)
    return _feedback_velocity(field.values, cfg)


def face_velocities(
    p_hat: ScalarField | np.ndarray, cfg: ControlConfig, face_density: str = "upwind"
) -> list[np.ndarray]:
    """The same law evaluated on cell faces (staggered form).

    Gradients become two-point face differences and ``alpha`` is averaged
    arithmetically onto faces. The density in the denominator is the face
    value the advection scheme will use: the upwind cell (picked by the sign
    of the numerator, which fixes the sign of ``v``) or the two-cell average.
    Advecting ``p_hat`` with these velocities therefore reproduces the
    numerator exactly, so the flux reduces to ``-alpha * grad(p_hat - p_target)``
    plus the diffusion term.

    Returns one array per axis with ``n_k + 1`` entries along axis ``k``;
    boundary faces are zero.
    """
    p = p_hat.values if isinstance(p_hat, ScalarField) else np.asarray(p_hat, dtype=float)
    grid = cfg.grid
    if np.any(p <= 0):
        raise ValueError("feedback law divides by the density; got a nonpositive cell")
    phi = p - cfg.target.values
    sp = cfg.sigma_values() * p
    alpha = cfg.alpha_values()
    out = []
    for k, h in enumerate(grid.widths):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(None, -1)
        hi[k] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        a_face = 0.5 * (alpha[lo] + alpha[hi])
        num = a_face * (phi[hi] - phi[lo]) / h - (sp[hi] - sp[lo]) / h
        if face_density == "upwind":
            denom = np.where(num < 0, p[lo], p[hi])
        elif face_density == "central":
            denom = 0.5 * (p[lo] + p[hi])
        else:
            raise ValueError(f"unknown face density rule {face_density!r}")
        v = -num / denom
        if cfg.velocity_cap is not None:
            v = np.clip(v, -cfg.velocity_cap, cfg.velocity_cap)
        pad = [(0, 0)] * grid.dim
        pad[k] = (1, 1)
        out.append(np.pad(v, pad))
    return out
