"""Conservative finite-volume solver for the Fokker-Planck equation

    dp/dt = -div(v p) + laplacian(sigma p)

on the unit box with zero total flux through the walls.

Face fluxes are ``F = v_face * p_face - ((sigma p)_R - (sigma p)_L) / h``;
wall faces carry no flux, so the update telescopes and total mass is
conserved to rounding. With upwind ``p_face`` and a step inside
``stable_time_step`` the update is a nonnegative combination of old cell
values, so nonnegative densities stay nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .control import ControlConfig, face_velocities
from .grid import Grid, ScalarField, VectorField

__all__ = [
    "FpScheme",
    "CflViolation",
    "cell_to_face",
    "stable_time_step",
    "face_fluxes",
    "fp_step",
    "closed_loop_fluxes",
    "closed_loop_step",
    "energy_rate",
]

ADVECTION = ("upwind", "central")
TIME_STEP_MODES = ("fixed", "cfl_auto")
STEP_COLLAPSE = 1e-10


class CflViolation(ValueError):
    """A fixed time step exceeds the stability/positivity bound."""


@dataclass(frozen=True)
class FpScheme:
    advection: str = "upwind"
    time_step_mode: str = "cfl_auto"
    cfl_safety: float = 0.9

    def __post_init__(self) -> None:
        if self.advection not in ADVECTION:
            raise ValueError(f"advection must be one of {ADVECTION}")
        if self.time_step_mode not in TIME_STEP_MODES:
            raise ValueError(f"time_step_mode must be one of {TIME_STEP_MODES}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")


def _slices(dim: int, axis: int) -> tuple[tuple[slice, ...], tuple[slice, ...]]:
    lo = [slice(None)] * dim
    hi = [slice(None)] * dim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return tuple(lo), tuple(hi)


def cell_to_face(v: VectorField) -> list[np.ndarray]:
    """Arithmetic face averages of a cell-centered velocity; wall faces set to zero."""
    out = []
    for k, c in enumerate(v.components):
        lo, hi = _slices(v.grid.dim, k)
        pad = [(0, 0)] * v.grid.dim
        pad[k] = (1, 1)
        out.append(np.pad(0.5 * (c[lo] + c[hi]), pad))
    return out


def stable_time_step(grid: Grid, face_v: list[np.ndarray], sigma: np.ndarray) -> float:
    """Largest step keeping the explicit upwind update monotone.

    A cell loses at most ``2 max|v_k| / h_k`` through advection and
    ``2 sigma / h_k**2`` through diffusion per axis, per unit time; the step
    keeps the total below one. This is never larger than
    ``min(h / max|v|, h**2 / (2 dim max sigma))``.
    """
    rate = 0.0
    smax = float(np.max(sigma))
    for k, h in enumerate(grid.widths):
        rate += 2.0 * float(np.max(np.abs(face_v[k]))) / h + 2.0 * smax / h**2
    return math.inf if rate == 0 else 1.0 / rate


def face_fluxes(
    p: np.ndarray, face_v: list[np.ndarray], sigma: np.ndarray, grid: Grid, advection: str = "upwind"
) -> list[np.ndarray]:
    """Total flux through every face (wall faces are exactly zero)."""
    sp = sigma * p
    out = []
    for k, h in enumerate(grid.widths):
        lo, hi = _slices(grid.dim, k)
        inner = [slice(None)] * grid.dim
        inner[k] = slice(1, -1)
        v = face_v[k][tuple(inner)]
        if advection == "upwind":
            adv = np.maximum(v, 0.0) * p[lo] + np.minimum(v, 0.0) * p[hi]
        else:
            adv = v * 0.5 * (p[lo] + p[hi])
        flux = adv - (sp[hi] - sp[lo]) / h
        pad = [(0, 0)] * grid.dim
        pad[k] = (1, 1)
        out.append(np.pad(flux, pad))
    return out


def _flux_divergence(fluxes: list[np.ndarray], grid: Grid) -> np.ndarray:
    out = np.zeros(grid.shape)
    for k, h in enumerate(grid.widths):
        out += np.diff(fluxes[k], axis=k) / h
    return out


def _coef_array(c: Union[ScalarField, float], grid: Grid) -> np.ndarray:
    if isinstance(c, ScalarField):
        if c.grid != grid:
            raise ValueError("coefficient lives on a different grid")
        arr = c.values
    else:
        arr = np.full(grid.shape, float(c))
    if np.any(arr < 0):
        raise ValueError("sigma must be nonnegative")
    return arr


def _check_density(p: ScalarField) -> None:
    vals = p.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("density has nonfinite entries")
    if np.any(vals < 0):
        raise ValueError("density must be nonnegative")
    mass = float(vals.sum()) * p.grid.cell_volume
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"density integrates to {mass}, expected 1")


def _substeps(dt: float, limit: float, scheme: FpScheme) -> int:
    allowed = scheme.cfl_safety * limit
    if dt <= allowed:
        return 1
    if scheme.time_step_mode == "fixed":
        raise CflViolation(f"dt={dt:g} exceeds the stable step {allowed:g}")
    return int(math.ceil(dt / allowed))


def fp_step(
    p: ScalarField,
    v: VectorField,
    sigma: Union[ScalarField, float],
    dt: float,
    scheme: FpScheme = FpScheme(),
) -> ScalarField:
    """Advance the density by ``dt`` under a frozen cell-centered velocity.

    In ``cfl_auto`` mode the step is split into equal substeps that respect
    the stability bound; ``fixed`` mode raises CflViolation instead.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if v.grid != p.grid:
        raise ValueError("velocity and density live on different grids")
    _check_density(p)
    grid = p.grid
    s = _coef_array(sigma, grid)
    face_v = cell_to_face(v)
    if not all(np.all(np.isfinite(f)) for f in face_v):
        raise ValueError("velocity field has nonfinite entries")
    n = _substeps(dt, stable_time_step(grid, face_v, s), scheme)
    h = dt / n
    vals = np.array(p.values)
    for _ in range(n):
        vals = vals - h * _flux_divergence(face_fluxes(vals, face_v, s, grid, scheme.advection), grid)
    return ScalarField(grid, vals)


def _alpha_limit(cfg: ControlConfig) -> float:
    amax = float(np.max(cfg.alpha_values()))
    return 1.0 / sum(2.0 * amax / h**2 for h in cfg.grid.widths)


def closed_loop_fluxes(
    p: np.ndarray,
    cfg: ControlConfig,
    advection: str = "upwind",
    epsilon: np.ndarray | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Face velocities and fluxes of the closed loop at density ``p``.

    The law is fed ``p * (1 + epsilon)`` when an estimation error is given.
    """
    p_hat = p if epsilon is None else p * (1.0 + epsilon)
    face_v = face_velocities(p_hat, cfg, face_density=advection)
    return face_v, face_fluxes(p, face_v, cfg.sigma_values(), cfg.grid, advection)


def closed_loop_step(
    p: ScalarField,
    cfg: ControlConfig,
    dt: float,
    scheme: FpScheme = FpScheme(),
    epsilon: Union[ScalarField, np.ndarray, None] = None,
) -> ScalarField:
    """Advance the macroscopic closed loop by ``dt``.

    The feedback law is re-evaluated (in staggered form, see
    ``control.face_velocities``) at every internal substep. Without
    ``epsilon`` the discrete update is exactly an explicit diffusion step
    for ``p - p_target`` with face coefficient ``alpha``. ``epsilon`` is the
    relative estimation error held fixed over ``dt``.

    Raises
    ------
    CflViolation
        In ``fixed`` mode when ``dt`` exceeds the stable step, or in any
        mode when a cell is drained to zero and the stable step collapses.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if p.grid != cfg.grid:
        raise ValueError("density and target live on different grids")
    _check_density(p)
    if np.any(p.values <= 0):
        raise ValueError("closed loop requires a strictly positive density")
    eps = None
    if epsilon is not None:
        eps = epsilon.values if isinstance(epsilon, ScalarField) else np.asarray(epsilon, float)
        if np.any(eps <= -1):
            raise ValueError("estimation error must exceed -1")
    grid = p.grid
    s = cfg.sigma_values()
    alpha_lim = _alpha_limit(cfg)
    vals = np.array(p.values)
    t = 0.0
    first = True
    while t < dt:
        if not first and np.any(vals <= 0):
            # central advection can overshoot a draining cell within one substep
            raise CflViolation(f"stable step collapsed: density reached {vals.min():.3g} at t={t:.6g}")
        face_v, fluxes = closed_loop_fluxes(vals, cfg, scheme.advection, eps)
        if not all(np.all(np.isfinite(f)) for f in fluxes):
            raise FloatingPointError("closed-loop flux became nonfinite")
        allowed = scheme.cfl_safety * min(stable_time_step(grid, face_v, s), alpha_lim)
        remaining = dt - t
        if first and scheme.time_step_mode == "fixed" and dt > allowed:
            raise CflViolation(f"dt={dt:g} exceeds the stable step {allowed:g}")
        first = False
        if not allowed > STEP_COLLAPSE * dt:
            # the uncapped law blows up as some cell is drained towards zero
            raise CflViolation(
                f"stable step collapsed to {allowed:.3g} at t={t:.6g} (min density {vals.min():.3g})"
            )
        if remaining <= allowed:
            h = remaining
        else:
            # equal-ish pieces, so the last substep is not a sliver
            h = remaining / math.ceil(remaining / allowed)
        vals = vals - h * _flux_divergence(fluxes, grid)
        t = dt if h == remaining else t + h
    return ScalarField(grid, vals)


def energy_rate(p: ScalarField, p_target: ScalarField, fluxes: list[np.ndarray]) -> float:
    """Discrete time derivative of ``0.5 * ||p - p_target||^2`` under ``fluxes``.

    Summation by parts over faces: ``sum_faces grad_face(phi) * F * dV``.
    For an explicit step of length ``dt`` the change in the Lyapunov value
    equals ``dt * rate + 0.5 * dt**2 * ||div F||^2`` exactly.
    """
    grid = p.grid
    phi = p.values - p_target.values
    total = 0.0
    for k, h in enumerate(grid.widths):
        lo, hi = _slices(grid.dim, k)
        inner = [slice(None)] * grid.dim
        inner[k] = slice(1, -1)
        total += float(np.sum((phi[hi] - phi[lo]) / h * fluxes[k][tuple(inner)]))
    return total * grid.cell_volume
