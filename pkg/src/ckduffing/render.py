"""Deterministic PNG heatmaps of Husimi log-densities.

Values are mapped linearly from ``[min, max]`` of the (log) matrix onto the
256-entry viridis table below; a constant matrix maps to entry 0. The
x axis runs left to right and P bottom to top. Overlay points are single
pixels in pure red, which does not occur in viridis.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from PIL import Image

from .fileio import OutputError
from .phasespace import HusimiField, log_density

COLORMAP = np.round(matplotlib.colormaps["viridis"](np.linspace(0.0, 1.0, 256))[:, :3] * 255).astype(np.uint8)
OVERLAY_COLOR = np.array([255, 0, 0], dtype=np.uint8)


def color_indices(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite")
    lo, hi = m.min(), m.max()
    if hi <= lo:
        return np.zeros(m.shape, dtype=np.uint8)
    return np.clip(np.floor((m - lo) / (hi - lo) * 256), 0, 255).astype(np.uint8)


def heatmap_rgb(matrix: np.ndarray) -> np.ndarray:
    """``(nx, nP)`` matrix to an ``(nP, nx, 3)`` image with P increasing upwards."""
    idx = color_indices(matrix)
    return COLORMAP[idx.T[::-1]]


def overlay_pixels(points: np.ndarray, x_centers, P_centers) -> tuple[np.ndarray, np.ndarray]:
    """Row/column of the nearest pixel for every point inside the window."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    nx, nP = len(x_centers), len(P_centers)
    dx = (x_centers[-1] - x_centers[0]) / (nx - 1)
    dP = (P_centers[-1] - P_centers[0]) / (nP - 1)
    col = np.rint((pts[:, 0] - x_centers[0]) / dx).astype(int)
    j = np.rint((pts[:, 1] - P_centers[0]) / dP).astype(int)
    inside = (col >= 0) & (col < nx) & (j >= 0) & (j < nP)
    return nP - 1 - j[inside], col[inside]


def render_heatmap(field, path, points=None, floor: float = 1e-12, log: bool = True):
    """Write a PNG of ``field`` (a HusimiField or a plain matrix).

    A HusimiField is drawn as ``log10(max(Q, floor))`` unless ``log=False``.
    Overlay points need the field's axes, so they require a HusimiField.
    """
    if isinstance(field, HusimiField):
        matrix = log_density(field, floor) if log else field.values
    else:
        matrix = np.asarray(field, dtype=float)
    rgb = heatmap_rgb(matrix)
    if points is not None:
        if not isinstance(field, HusimiField):
            raise TypeError("overlay points need a HusimiField for the axis mapping")
        rows, cols = overlay_pixels(points, field.x_centers, field.P_centers)
        rgb[rows, cols] = OVERLAY_COLOR
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(rgb).save(path, format="PNG", optimize=False)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
