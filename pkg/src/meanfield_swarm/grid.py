"""Uniform cell-centered grids on the unit box and discrete operators on them.

Values of a field are stored as an array of shape ``grid.shape`` where axis 0
runs along x and axis 1 (2-D only) along y. Cell ``i`` along an axis has its
center at ``(i + 0.5) * width``.

Boundary handling
-----------------
The first-derivative operators take a ``no_flux`` flag. Without it, boundary
cells use one-sided second-order stencils. With it, values are continued into
a ghost layer by mirroring:

* ``gradient`` mirrors evenly (``f[-1] = f[0]``), i.e. zero normal derivative;
* ``divergence`` mirrors oddly (``F[-1] = -F[0]``), i.e. zero normal component
  on the boundary face.

With that pairing the discrete summation-by-parts identity
``sum(f * div F) + sum(grad f . F) == 0`` holds to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "gradient",
    "divergence",
    "laplacian",
    "integrate",
    "interpolate",
    "write_scalar_csv",
    "read_scalar_csv",
    "write_vector_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered discretization of ``(0, 1)**dim``."""

    dim: int
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        if len(cells) != self.dim:
            raise ValueError(f"need {self.dim} cell counts, got {len(cells)}")
        if any(n < 1 for n in cells):
            raise ValueError(f"cell counts must be positive, got {cells}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def cube(cls, n: int, dim: int = 2) -> Grid:
        return cls(dim, (n,) * dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return math.prod(self.cells)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.cells)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.widths)

    def centers(self, axis: int) -> np.ndarray:
        n = self.cells[axis]
        return (np.arange(n) + 0.5) / n

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates, one array of ``shape`` per axis."""
        return tuple(np.meshgrid(*(self.centers(k) for k in range(self.dim)), indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell centers as an ``(size, dim)`` array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.flags.writeable = False
    return values


@dataclass(frozen=True)
class ScalarField:
    """Cell-centered samples of a scalar function on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {values.size}")
        object.__setattr__(self, "values", _frozen(values.reshape(self.grid.shape)))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> ScalarField:
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> ScalarField:
        """Sample ``fn(x)`` (1-D) or ``fn(x, y)`` (2-D) at cell centers."""
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape))

    def with_values(self, values: np.ndarray) -> ScalarField:
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class VectorField:
    """Cell-centered vector field; one component array per axis."""

    grid: Grid
    components: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if len(comps) != self.grid.dim:
            raise ValueError(f"need {self.grid.dim} components, got {len(comps)}")
        frozen = []
        for c in comps:
            c = np.asarray(c, dtype=float)
            if c.size != self.grid.size:
                raise ValueError(f"component has {c.size} values, expected {self.grid.size}")
            frozen.append(_frozen(c.reshape(self.grid.shape)))
        object.__setattr__(self, "components", tuple(frozen))

    def component(self, axis: int) -> ScalarField:
        return ScalarField(self.grid, self.components[axis])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.components))


# ---------------------------------------------------------------------------
# array-level stencils


def _check_stencil_grid(grid: Grid) -> None:
    if min(grid.cells) < 3:
        raise ValueError(f"finite-difference operators need >= 3 cells per axis, got {grid.cells}")


def diff_axis(a: np.ndarray, h: float, axis: int, ghost: str | None = None) -> np.ndarray:
    """Central first difference of ``a`` along ``axis``.

    ``ghost`` selects the boundary rule: ``None`` for one-sided second-order
    stencils, ``"even"`` or ``"odd"`` for mirrored ghost cells.
    """
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2.0 * h)
    if ghost is None:
        out[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)
        out[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) / (2.0 * h)
    elif ghost == "even":
        out[0] = (a[1] - a[0]) / (2.0 * h)
        out[-1] = (a[-1] - a[-2]) / (2.0 * h)
    elif ghost == "odd":
        out[0] = (a[1] + a[0]) / (2.0 * h)
        out[-1] = (-a[-1] - a[-2]) / (2.0 * h)
    else:
        raise ValueError(f"unknown ghost rule {ghost!r}")
    return np.moveaxis(out, 0, axis)


def second_diff_axis(a: np.ndarray, h: float, axis: int, no_flux: bool = False) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h**2
    if no_flux:
        out[0] = (a[1] - a[0]) / h**2
        out[-1] = (a[-2] - a[-1]) / h**2
    elif a.shape[0] >= 4:
        out[0] = (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / h**2
        out[-1] = (2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]) / h**2
    else:
        out[0] = (a[0] - 2.0 * a[1] + a[2]) / h**2
        out[-1] = (a[-1] - 2.0 * a[-2] + a[-3]) / h**2
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# field operators


def gradient(f: ScalarField, no_flux: bool = False) -> VectorField:
    """Central-difference gradient.

    Parameters
    ----------
    f : ScalarField
        Field on a grid with at least 3 cells per axis.
    no_flux : bool
        Use even ghost cells (zero normal derivative) at the boundary instead
        of one-sided second-order stencils.
    """
    grid = f.grid
    _check_stencil_grid(grid)
    ghost = "even" if no_flux else None
    return VectorField(
        grid, tuple(diff_axis(f.values, h, k, ghost) for k, h in enumerate(grid.widths))
    )


def divergence(F: VectorField, no_flux: bool = False) -> ScalarField:
    """Sum of per-axis central differences of the components of ``F``.

    With ``no_flux`` the normal component is continued oddly across the
    boundary, which makes this the negative adjoint of ``gradient(no_flux=True)``.
    """
    grid = F.grid
    _check_stencil_grid(grid)
    ghost = "odd" if no_flux else None
    out = np.zeros(grid.shape)
    for k, h in enumerate(grid.widths):
        out += diff_axis(F.components[k], h, k, ghost)
    return ScalarField(grid, out)


def laplacian(f: ScalarField, no_flux: bool = False) -> ScalarField:
    """Compact (2*dim+1)-point Laplacian."""
    grid = f.grid
    _check_stencil_grid(grid)
    out = np.zeros(grid.shape)
    for k, h in enumerate(grid.widths):
        out += second_diff_axis(f.values, h, k, no_flux)
    return ScalarField(grid, out)


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over the unit box."""
    return float(np.sum(f.values) * f.grid.cell_volume)


def _as_points(x: np.ndarray | Sequence[float] | float, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1 and x.size == dim
    pts = x.reshape(-1, dim)
    if not np.all(np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ValueError("query points must lie in the closed unit box")
    return pts, single


def interpolation_weights(grid: Grid, pts: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-axis (lower index, fractional offset) for multilinear interpolation.

    Coordinates outside the box spanned by the outermost cell centers are
    clamped onto it, so those points take the nearest face value.
    """
    out = []
    for k, n in enumerate(grid.cells):
        u = np.clip(pts[:, k] * n - 0.5, 0.0, n - 1.0)
        if n == 1:
            out.append((np.zeros(len(u), dtype=int), np.zeros(len(u))))
            continue
        i0 = np.minimum(np.floor(u).astype(int), n - 2)
        out.append((i0, u - i0))
    return out


def _interp_array(values: np.ndarray, weights: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    if len(weights) == 1:
        (i, t), = weights
        upper = np.minimum(i + 1, values.shape[0] - 1)
        return (1.0 - t) * values[i] + t * values[upper]
    (i, s), (j, t) = weights
    i1 = np.minimum(i + 1, values.shape[0] - 1)
    j1 = np.minimum(j + 1, values.shape[1] - 1)
    return (
        (1.0 - s) * (1.0 - t) * values[i, j]
        + s * (1.0 - t) * values[i1, j]
        + (1.0 - s) * t * values[i, j1]
        + s * t * values[i1, j1]
    )


def interpolate(
    f: Union[ScalarField, VectorField], x: np.ndarray | Sequence[float] | float
) -> Union[float, np.ndarray]:
    """Multilinear interpolation of a field at one or many positions.

    ``x`` is a single point of length ``dim`` or an ``(M, dim)`` array. A
    scalar field returns a float or an ``(M,)`` array; a vector field returns
    a ``(dim,)`` vector or an ``(M, dim)`` array.
    """
    grid = f.grid
    pts, single = _as_points(x, grid.dim)
    w = interpolation_weights(grid, pts)
    if isinstance(f, ScalarField):
        out = _interp_array(f.values, w)
        return float(out[0]) if single else out
    out = np.stack([_interp_array(c, w) for c in f.components], axis=1)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# CSV serialization


def write_scalar_csv(f: ScalarField, path: str | Path) -> None:
    """Write ``f`` as CSV.

    The first line holds ``nx,ny,cell_width``; then one row per x index with
    ``ny`` comma-separated values (``ny = 1`` on 1-D grids).
    """
    grid = f.grid
    nx = grid.cells[0]
    ny = grid.cells[1] if grid.dim == 2 else 1
    lines = [f"{nx},{ny},{grid.widths[0]!r}"]
    for row in f.values.reshape(nx, ny):
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_scalar_csv(path: str | Path) -> ScalarField:
    lines = Path(path).read_text().strip().splitlines()
    nx, ny, _ = lines[0].split(",")
    nx, ny = int(nx), int(ny)
    values = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if values.shape != (nx, ny):
        raise ValueError(f"{path}: header says {nx}x{ny}, body is {values.shape}")
    grid = Grid(1, (nx,)) if ny == 1 else Grid(2, (nx, ny))
    return ScalarField(grid, values)


def write_vector_csv(v: VectorField, path: str | Path) -> None:
    """One row per cell: ``x,y,v1,v2`` (``x,v1`` on 1-D grids)."""
    grid = v.grid
    pts = grid.points()
    cols = [pts[:, k] for k in range(grid.dim)] + [c.ravel() for c in v.components]
    header = "x,v1" if grid.dim == 1 else "x,y,v1,v2"
    rows = np.stack(cols, axis=1)
    body = "\n".join(",".join(repr(float(a)) for a in r) for r in rows)
    Path(path).write_text(header + "\n" + body + "\n")
