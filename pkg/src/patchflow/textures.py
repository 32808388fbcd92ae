"""Deterministic procedural reference textures for tests and demos.

All generators return grayscale float images of shape (height, width, 1)
with values in [0, 255]; normalize them before synthesis.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stripes", "checker", "blue_noise_dots"]


def _check_dims(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")


def stripes(height: int, width: int, period: int = 8) -> np.ndarray:
    """Vertical black/white bands, each period//2 pixels wide."""
    _check_dims(height, width)
    if period < 2:
        raise ValueError(f"period must be >= 2, got {period}")
    cols = (np.arange(width) % period) < (period // 2)
    img = np.where(cols, 255.0, 0.0)[None, :].repeat(height, axis=0)
    return img[:, :, None]


def checker(height: int, width: int, cell: int = 8) -> np.ndarray:
    """Checkerboard of cell x cell squares."""
    _check_dims(height, width)
    if cell < 1:
        raise ValueError(f"cell must be >= 1, got {cell}")
    r = np.arange(height)[:, None] // cell
    c = np.arange(width)[None, :] // cell
    return np.where((r + c) % 2 == 0, 255.0, 0.0)[:, :, None]


def blue_noise_dots(
    height: int,
    width: int,
    radius: int = 3,
    spacing: int = 12,
    seed: int = 0,
    attempts: int = 20000,
) -> np.ndarray:
    """White discs on black, placed by dart throwing with a minimum
    center-to-center spacing (toroidal, so the texture tiles cleanly)."""
    _check_dims(height, width)
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if spacing <= 2 * radius:
        raise ValueError(f"spacing must exceed the dot diameter, got {spacing} <= {2 * radius}")
    rng = np.random.default_rng(seed)
    centers: list[tuple[float, float]] = []
    for _ in range(attempts):
        cy = rng.uniform(0, height)
        cx = rng.uniform(0, width)
        ok = True
        for py, px in centers:
            dy = min(abs(cy - py), height - abs(cy - py))
            dx = min(abs(cx - px), width - abs(cx - px))
            if dy * dy + dx * dx < spacing * spacing:
                ok = False
                break
        if ok:
            centers.append((cy, cx))

    img = np.zeros((height, width))
    yy = np.arange(height)[:, None]
    xx = np.arange(width)[None, :]
    for cy, cx in centers:
        dy = np.minimum(np.abs(yy - cy), height - np.abs(yy - cy))
        dx = np.minimum(np.abs(xx - cx), width - np.abs(xx - cx))
        img[dy * dy + dx * dx <= radius * radius] = 255.0
    return img[:, :, None]
