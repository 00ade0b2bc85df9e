"""Run configuration: YAML file -> SimConfig.

Densities (target and initial condition) are given as small specs::

    {kind: uniform}
    {kind: gaussian_mixture, means: [[0.3, 0.7], [0.7, 0.3]], stds: [0.0475, 0.0475],
     weights: [0.5, 0.5], floor: 1.0e-3}
    {kind: cosine, amplitude: 0.3, wavenumber: 1}
    {kind: from_file, path: target.csv}

``alpha`` and ``sigma`` are numbers or ``{kind: from_file, path: ...}``
(raw cell values in the ScalarField CSV format, not normalized).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from ..fokker_planck import FpScheme
from ..grid import Grid, ScalarField, read_scalar_csv
from ..kde import KdeConfig

__all__ = [
    "SimConfig",
    "ErrorInjection",
    "build_density",
    "build_coefficient",
    "load_config",
    "apply_overrides",
    "DEFAULTS",
]

# two sharp lobes: the swarm's residual against this target stays well above
# the step-to-step KDE jitter caused by the noise term
DEFAULT_TARGET = {
    "kind": "gaussian_mixture",
    "means": [[0.3, 0.7], [0.7, 0.3]],
    "stds": [0.0475, 0.0475],
    "weights": [0.5, 0.5],
    "floor": 1.0e-3,
}

# mirrors the published swarm experiment: 1024 agents, 64x64 grid, dt 0.02,
# sigma 0.0005, alpha 0.03, bandwidth 0.045, uniform start
DEFAULTS: dict[str, Any] = {
    "dim": 2,
    "n_agents": 1024,
    "cells": 64,
    "dt": 0.02,
    "t_end": 20.0,
    "sigma": 0.0005,
    "alpha": 0.03,
    "velocity_cap": 5.0,
    "seed": 0,
    "kde": {"bandwidth": 0.045, "truncation_radius": 4.0, "boundary_correction": "renormalize"},
    "scheme": {"advection": "upwind", "time_step_mode": "cfl_auto", "cfl_safety": 0.9},
    "target": DEFAULT_TARGET,
    "initial": {"kind": "uniform"},
    "error_injection": {"mode": "none"},
    "output": {"dir": None, "snapshot_every": 0},
}

INJECTION_MODES = ("none", "multiplicative_constant", "smooth_field")


@dataclass(frozen=True)
class ErrorInjection:
    """Manufactured relative estimation error for the macroscopic loop.

    ``multiplicative_constant`` uses ``eps = value``; ``smooth_field`` uses
    ``eps = value * prod_k cos(wavenumber * pi * x_k)``. Injection is active
    for ``t < t_off`` (always, when ``t_off`` is None).
    """

    mode: str = "none"
    value: float = 0.0
    wavenumber: int = 1
    t_off: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in INJECTION_MODES:
            raise ValueError(f"error_injection.mode must be one of {INJECTION_MODES}")
        if self.mode == "multiplicative_constant" and not self.value > -1:
            raise ValueError("multiplicative error must exceed -1")
        if self.mode == "smooth_field" and not abs(self.value) < 1:
            raise ValueError("smooth_field amplitude must satisfy |a| < 1")

    def active(self, t: float) -> bool:
        if self.mode == "none":
            return False
        return self.t_off is None or t < self.t_off - 1e-12

    def epsilon(self, grid: Grid) -> ScalarField:
        if self.mode == "multiplicative_constant":
            return ScalarField.constant(grid, self.value)
        if self.mode == "smooth_field":
            shape = np.ones(grid.shape)
            for m in grid.mesh():
                shape = shape * np.cos(self.wavenumber * math.pi * m)
            return ScalarField(grid, self.value * shape)
        return ScalarField.constant(grid, 0.0)


@dataclass(frozen=True)
class SimConfig:
    dim: int = 2
    n_agents: int = 1024
    cells: int = 64
    dt: float = 0.02
    t_end: float = 20.0
    sigma: float | Mapping[str, Any] = 0.0005
    alpha: float | Mapping[str, Any] = 0.03
    velocity_cap: float | None = 5.0
    seed: int = 0
    kde: KdeConfig = field(default_factory=KdeConfig)
    scheme: FpScheme = field(default_factory=FpScheme)
    target: Mapping[str, Any] = field(default_factory=lambda: dict(DEFAULT_TARGET))
    initial: Mapping[str, Any] = field(default_factory=lambda: {"kind": "uniform"})
    error_injection: ErrorInjection = field(default_factory=ErrorInjection)
    output_dir: str | None = None
    snapshot_every: int = 0
    base_dir: str = "."

    def __post_init__(self) -> None:
        for name in ("n_agents", "cells", "dt", "t_end"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not isinstance(self.alpha, Mapping) and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not isinstance(self.sigma, Mapping) and self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be nonnegative")

    @property
    def grid(self) -> Grid:
        return Grid.cube(self.cells, self.dim)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: str | Path = ".") -> SimConfig:
        merged = _merge(DEFAULTS, d)
        unknown = set(merged) - set(DEFAULTS) - {"sweep"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        out = merged["output"] or {}
        cap = merged["velocity_cap"]
        return cls(
            dim=int(merged["dim"]),
            n_agents=int(merged["n_agents"]),
            cells=int(merged["cells"]),
            dt=float(merged["dt"]),
            t_end=float(merged["t_end"]),
            sigma=_coef_spec(merged["sigma"]),
            alpha=_coef_spec(merged["alpha"]),
            velocity_cap=None if cap is None else float(cap),
            seed=int(merged["seed"]),
            kde=KdeConfig(**merged["kde"]),
            scheme=FpScheme(**merged["scheme"]),
            target=merged["target"],
            initial=merged["initial"],
            error_injection=ErrorInjection(**merged["error_injection"]),
            output_dir=out.get("dir"),
            snapshot_every=int(out.get("snapshot_every", 0) or 0),
            base_dir=str(base_dir),
        )


def _coef_spec(value: Any) -> float | Mapping[str, Any]:
    return value if isinstance(value, Mapping) else float(value)


def _merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(dict(base))
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping) and k not in ("target", "initial"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_overrides(d: Mapping[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars."""
    out = copy.deepcopy(dict(d))
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValueError(f"override {item!r} descends into a non-mapping")
        node[parts[-1]] = yaml.safe_load(raw)
    return out


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> tuple[SimConfig, dict]:
    """Read a YAML config and return ``(SimConfig, raw mapping)``."""
    raw: dict[str, Any] = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        raw = yaml.safe_load(path.read_text()) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a mapping")
        base = path.parent
    raw = apply_overrides(raw, overrides or [])
    return SimConfig.from_dict(raw, base), raw


def _normalize(grid: Grid, values: np.ndarray) -> ScalarField:
    mass = float(values.sum()) * grid.cell_volume
    if not mass > 0:
        raise ValueError("density spec has zero mass on the grid")
    return ScalarField(grid, values / mass)


def build_density(spec: Mapping[str, Any], grid: Grid, base_dir: str | Path = ".") -> ScalarField:
    """Turn a density spec into a unit-mass ScalarField on ``grid``."""
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return ScalarField.constant(grid, 1.0)
    if kind == "gaussian_mixture":
        means = np.atleast_2d(np.asarray(spec["means"], dtype=float))
        k = len(means)
        stds = np.broadcast_to(np.asarray(spec.get("stds", 0.1), dtype=float), (k,))
        weights = np.broadcast_to(np.asarray(spec.get("weights", 1.0 / k), dtype=float), (k,))
        if means.shape[1] != grid.dim:
            raise ValueError(f"mixture means must have {grid.dim} coordinates")
        mesh = grid.mesh()
        vals = np.zeros(grid.shape)
        for mu, s, w in zip(means, stds, weights):
            r2 = sum((m - c) ** 2 for m, c in zip(mesh, mu))
            vals += w * np.exp(-0.5 * r2 / s**2) / (2 * math.pi * s**2) ** (grid.dim / 2)
        floor = float(spec.get("floor", 1e-3))
        vals = _normalize(grid, vals).values
        # additive floor keeps the target smooth and strictly positive
        return _normalize(grid, vals + floor)
    if kind == "cosine":
        a = float(spec.get("amplitude", 0.3))
        kw = int(spec.get("wavenumber", 1))
        if not abs(a) < 1:
            raise ValueError("cosine amplitude must satisfy |a| < 1")
        shape = np.ones(grid.shape)
        for m in grid.mesh():
            shape = shape * np.cos(kw * math.pi * m)
        return _normalize(grid, 1.0 + a * shape)
    if kind == "from_file":
        f = read_scalar_csv(Path(base_dir) / spec["path"])
        if f.grid != grid:
            raise ValueError(f"{spec['path']}: grid {f.grid.cells} does not match {grid.cells}")
        if np.any(f.values < 0):
            raise ValueError(f"{spec['path']}: density has negative cells")
        return _normalize(grid, np.array(f.values))
    raise ValueError(f"unknown density kind {kind!r}")


def build_coefficient(spec: float | Mapping[str, Any], grid: Grid, base_dir: str | Path = ".") -> float | ScalarField:
    """Turn an ``alpha``/``sigma`` spec into a constant or a field on ``grid``."""
    if not isinstance(spec, Mapping):
        return float(spec)
    if spec.get("kind") != "from_file":
        raise ValueError(f"coefficient field spec must have kind 'from_file', got {spec.get('kind')!r}")
    f = read_scalar_csv(Path(base_dir) / spec["path"])
    if f.grid != grid:
        raise ValueError(f"{spec['path']}: grid {f.grid.cells} does not match {grid.cells}")
    return f
