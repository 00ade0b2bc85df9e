"""Snapshot writers: PGM heatmaps and agent-position CSVs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..grid import ScalarField

__all__ = ["heatmap_pixels", "emit_heatmap", "write_positions_csv"]


def heatmap_pixels(f: ScalarField) -> np.ndarray:
    """8-bit image of ``f`` with linear min-max scaling.

    Rows run from the top (largest y) down, columns along x. Only cells equal
    to the maximum reach 255; a constant field maps to 127 everywhere.
    """
    vals = f.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("cannot render a field with nonfinite values")
    img = vals[:, None] if f.grid.dim == 1 else vals
    img = img.T[::-1]
    lo, hi = float(img.min()), float(img.max())
    if hi == lo:
        return np.full(img.shape, 127, dtype=np.uint8)
    scaled = np.floor((img - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def emit_heatmap(f: ScalarField, path: str | Path) -> Path:
    """Write ``f`` as a binary portable graymap (P5)."""
    pix = heatmap_pixels(f)
    rows, cols = pix.shape
    path = Path(path)
    path.write_bytes(f"P5 {cols} {rows} 255\n".encode("ascii") + pix.tobytes())
    return path


def write_positions_csv(positions: np.ndarray, path: str | Path) -> None:
    pos = np.asarray(positions)
    names = ["x", "y"][: pos.shape[1]]
    lines = ["agent_id," + ",".join(names)]
    for i, row in enumerate(pos):
        lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
