"""Convergence and robustness diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .grid import ScalarField, diff_axis

__all__ = [
    "Diagnostics",
    "IssBoundConfig",
    "l2_error",
    "lyapunov",
    "d_functional",
    "fit_decay_rate",
    "flattening_index",
    "liss_condition_margin",
]

DIAGNOSTICS_HEADER = ("t", "l2_error", "lyapunov", "d", "mass", "min_density", "max_speed")


def l2_error(p: ScalarField, p_star: ScalarField) -> float:
    """``||p - p_star||`` in L2 via midpoint quadrature."""
    if p.grid != p_star.grid:
        raise ValueError("grid mismatch")
    diff = p.values - p_star.values
    return math.sqrt(float(np.sum(diff * diff)) * p.grid.cell_volume)


def lyapunov(p: ScalarField, p_star: ScalarField) -> float:
    return 0.5 * l2_error(p, p_star) ** 2


def _epsilon_terms(epsilon: ScalarField) -> tuple[float, float]:
    eps = epsilon.values
    if np.any(eps <= -1):
        raise ValueError("epsilon must exceed -1 everywhere")
    grid = epsilon.grid
    sup_grad = 0.0
    if grid.size > 1:
        g2 = np.zeros(grid.shape)
        for k, h in enumerate(grid.widths):
            g2 += diff_axis(eps, h, k) ** 2
        sup_grad = float(np.max(np.sqrt(g2) / (1.0 + eps)))
    ratio = eps / (1.0 + eps)
    l2 = math.sqrt(float(np.sum(ratio * ratio)) * grid.cell_volume)
    return sup_grad, l2


def d_functional(epsilon: ScalarField) -> float:
    """ISS input ``max(||grad eps / (1 + eps)||_inf, ||eps / (1 + eps)||_2)``.

    The sup norm is a max over cells of the Euclidean gradient norm; the
    gradient uses one-sided stencils at the walls.
    """
    return max(_epsilon_terms(epsilon))


@dataclass(frozen=True)
class IssBoundConfig:
    """Splitting constant ``theta`` and Poincare constant of the unit box."""

    theta: float = 0.5
    poincare_C: float = 1.0 / math.pi

    def __post_init__(self) -> None:
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not self.poincare_C > 0:
            raise ValueError("poincare_C must be positive")


def liss_condition_margin(
    epsilon: ScalarField,
    alpha: Union[ScalarField, float],
    sigma: Union[ScalarField, float],
    bound_cfg: IssBoundConfig = IssBoundConfig(),
) -> float:
    """Slack in the local gradient bound on the estimation error.

    Returns ``alpha_min * theta / (C * ||alpha - sigma||_inf)`` minus
    ``||grad eps / (1 + eps)||_inf``; positive means the bound holds. When
    ``alpha == sigma`` everywhere the bound is vacuous and ``inf`` is returned.
    """
    grid = epsilon.grid
    a = alpha.values if isinstance(alpha, ScalarField) else np.full(grid.shape, float(alpha))
    s = sigma.values if isinstance(sigma, ScalarField) else np.full(grid.shape, float(sigma))
    sup_grad, _ = _epsilon_terms(epsilon)
    gap = float(np.max(np.abs(a - s)))
    if gap == 0.0:
        return math.inf
    rhs = float(np.min(a)) * bound_cfg.theta / (bound_cfg.poincare_C * gap)
    return rhs - sup_grad


def _series(times, values) -> tuple[np.ndarray, np.ndarray]:
    if values is None:
        arr = np.asarray(times, dtype=float)
        return arr[:, 0], arr[:, 1]
    return np.asarray(times, dtype=float), np.asarray(values, dtype=float)


def fit_decay_rate(times: Sequence, values: Sequence | None = None) -> float:
    """Negated least-squares slope of ``log(value)`` against ``t``.

    Accepts either ``(times, values)`` or a single sequence of ``(t, value)``
    pairs. Callers trim the series to the transient first.
    """
    t, y = _series(times, values)
    if len(t) < 10:
        raise ValueError(f"need at least 10 samples, got {len(t)}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("values must be positive and finite")
    slope = np.polyfit(t, np.log(y), 1)[0]
    return float(-slope)


def flattening_index(
    times: Sequence, values: Sequence, threshold: float = 0.05, window: int | None = None
) -> int:
    """Index where a decaying series first flattens onto its noise floor.

    The log-slope is fitted over a sliding window; the series has flattened
    once that decay rate drops below ``threshold`` times the rate over the
    first window. Returns ``len(values)`` if it never flattens.
    """
    t, y = _series(times, values)
    n = len(t)
    if window is None:
        window = max(3, n // 20)
    if n < window + 1:
        return n
    logy = np.log(y)
    rates = np.array(
        [-np.polyfit(t[i : i + window], logy[i : i + window], 1)[0] for i in range(n - window + 1)]
    )
    initial = rates[0]
    if not initial > 0:
        return 0
    below = np.nonzero(rates < threshold * initial)[0]
    return int(below[0]) if len(below) else n


@dataclass
class Diagnostics:
    """Per-step time series recorded by the simulation loops."""

    t: list[float] = field(default_factory=list)
    l2_error: list[float] = field(default_factory=list)
    lyapunov: list[float] = field(default_factory=list)
    d: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    min_density: list[float] = field(default_factory=list)
    max_speed: list[float] = field(default_factory=list)

    def append(
        self, t: float, l2: float, d: float, mass: float, min_density: float, max_speed: float
    ) -> None:
        self.t.append(float(t))
        self.l2_error.append(float(l2))
        self.lyapunov.append(0.5 * float(l2) ** 2)
        self.d.append(float(d))
        self.mass.append(float(mass))
        self.min_density.append(float(min_density))
        self.max_speed.append(float(max_speed))

    def __len__(self) -> int:
        return len(self.t)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def to_csv(self, path: str | Path) -> None:
        cols = [getattr(self, f.name) for f in fields(self)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DIAGNOSTICS_HEADER)
            for row in zip(*cols):
                w.writerow([repr(x) for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> Diagnostics:
        out = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != DIAGNOSTICS_HEADER:
                raise ValueError(f"unexpected diagnostics header {header}")
            for row in reader:
                for f, value in zip(fields(out), row):
                    getattr(out, f.name).append(float(value))
        return out
