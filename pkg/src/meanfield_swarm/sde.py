"""Euler-Maruyama integration of the agents with specular wall reflection."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .grid import ScalarField, VectorField, interpolate

__all__ = ["SwarmState", "sample_initial", "step", "reflect_into_unit_box"]


@dataclass(frozen=True)
class SwarmState:
    """Agent positions ``(N, dim)`` in the closed unit box, current time, RNG.

    The generator supplies the Wiener increments. ``step`` never mutates the
    generator it is given; it advances a copy and stores it in the new state.
    """

    positions: np.ndarray = field(repr=False)
    time: float = 0.0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if len(pos) == 0:
            raise ValueError("swarm must contain at least one agent")
        if np.any(pos < 0.0) or np.any(pos > 1.0):
            raise ValueError("agent positions must lie in the closed unit box")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def n_agents(self) -> int:
        return len(self.positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def sample_initial(
    n: int,
    initial_density: Union[str, ScalarField] = "uniform",
    seed: int = 0,
    dim: int = 2,
    max_proposals_per_agent: int = 10**6,
) -> SwarmState:
    """Draw ``n`` i.i.d. agent positions.

    ``initial_density`` is ``"uniform"`` or a ScalarField, in which case
    positions are rejection-sampled against its multilinear interpolant
    (``dim`` is then taken from the field's grid).
    """
    if n < 1:
        raise ValueError(f"need at least one agent, got {n}")
    rng = np.random.default_rng(seed)
    if isinstance(initial_density, str):
        if initial_density != "uniform":
            raise ValueError(f"unsupported initial density {initial_density!r}")
        return SwarmState(rng.random((n, dim)), 0.0, rng)
    if not isinstance(initial_density, ScalarField):
        raise TypeError(f"unsupported initial density spec {type(initial_density).__name__}")

    f = initial_density
    dim = f.grid.dim
    fmax = float(f.values.max())
    if not fmax > 0 or np.any(f.values < 0):
        raise ValueError("density must be nonnegative with positive maximum")
    accepted: list[np.ndarray] = []
    count = 0
    proposals = 0
    budget = max_proposals_per_agent * n
    while count < n:
        if proposals >= budget:
            raise RuntimeError(f"rejection sampling gave up after {proposals} proposals")
        batch = min(max(2 * (n - count), 1024), budget - proposals)
        x = rng.random((batch, dim))
        u = rng.random(batch)
        proposals += batch
        keep = x[u * fmax < interpolate(f, x)]
        accepted.append(keep)
        count += len(keep)
    return SwarmState(np.concatenate(accepted)[:n], 0.0, rng)


def reflect_into_unit_box(x: np.ndarray) -> np.ndarray:
    """Fold coordinates back into [0, 1] by repeated specular reflection."""
    y = np.mod(x, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def step(
    state: SwarmState,
    v: VectorField,
    sigma: Union[ScalarField, float],
    dt: float,
) -> SwarmState:
    """Advance every agent by one Euler-Maruyama step of length ``dt``.

    Each agent reads the broadcast field at its own position; the normal
    draws are consumed as an ``(N, dim)`` block in agent order.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if v.grid.dim != state.dim:
        raise ValueError("velocity field dimension does not match the swarm")
    if not all(np.all(np.isfinite(c)) for c in v.components):
        raise ValueError("velocity field has nonfinite entries")

    X = state.positions
    drift = interpolate(v, X)
    if isinstance(sigma, ScalarField):
        if np.any(sigma.values < 0):
            raise ValueError("sigma must be nonnegative")
        if sigma.grid != v.grid:
            raise ValueError("sigma and velocity live on different grids")
        s = interpolate(sigma, X)
    else:
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        s = np.full(len(X), float(sigma))

    rng = copy.deepcopy(state.rng)
    xi = rng.standard_normal(X.shape)
    new = X + drift * dt + np.sqrt(2.0 * s * dt)[:, None] * xi
    return SwarmState(reflect_into_unit_box(new), state.time + dt, rng)
