"""Image primitives: normalization, bilinear resizing, and PNG I/O.

Images are numpy float64 arrays of shape (height, width, channels) with 1
(gray) or 3 (RGB) channels. All synthesis math runs in a normalized value
space (by default [0, 255] mapped to [-1, 1] so Gaussian noise covers the
data range); 8-bit values exist only at the I/O boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage


@dataclass(frozen=True)
class NormStats:
    """Affine pixel normalization: v_norm = (v - shift) / scale."""

    shift: float = 127.5
    scale: float = 127.5

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")


DEFAULT_NORM = NormStats()


def as_image(arr) -> np.ndarray:
    """Coerce input to a (H, W, C) float64 array with C in {1, 3}.

    2-D arrays are promoted to a single channel. Raises ValueError on bad
    shapes or non-finite values.
    """
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W) or (H, W, 1|3) array, got shape {np.shape(arr)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"empty image of shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or Inf values")
    return img


def normalize(img, stats: NormStats = DEFAULT_NORM) -> np.ndarray:
    """Map pixel values v to (v - shift) / scale."""
    return (as_image(img) - stats.shift) / stats.scale


def denormalize(img, stats: NormStats = DEFAULT_NORM) -> np.ndarray:
    """Inverse of :func:`normalize`. No clamping; that happens only at export.

    Round-trips 8-bit-derived pixel values bit-exactly (verified for all 256
    levels at the default stats); arbitrary floats round-trip to ~1e-15.
    """
    return as_image(img) * stats.scale + stats.shift


def _linear_coords(n_in: int, n_out: int):
    # Half-pixel-centered coordinate mapping: output center j+0.5 lands at
    # input coordinate (j+0.5) * n_in/n_out.
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    x0 = np.floor(x).astype(np.int64)
    frac = x - x0
    lo = np.clip(x0, 0, n_in - 1)
    hi = np.clip(x0 + 1, 0, n_in - 1)
    return lo, hi, frac


def resize(img, new_w: int, new_h: int) -> np.ndarray:
    """Separable bilinear resize to (new_h, new_w).

    Resizing to the current size is the identity; constant images stay
    exactly constant (interpolation is computed as a + frac * (b - a)).
    """
    img = as_image(img)
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target size must be >= 1, got {new_w}x{new_h}")
    h, w = img.shape[:2]
    if (new_h, new_w) == (h, w):
        return img.copy()

    lo, hi, frac = _linear_coords(h, new_h)
    a = img[lo]
    out = a + frac[:, None, None] * (img[hi] - a)
    lo, hi, frac = _linear_coords(w, new_w)
    a = out[:, lo]
    out = a + frac[None, :, None] * (out[:, hi] - a)
    return out


def load_image(path, stats: NormStats = DEFAULT_NORM) -> np.ndarray:
    """Read an 8-bit PNG (gray or RGB) and return it in normalized space."""
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
        arr = np.asarray(im, dtype=np.float64)
    return normalize(arr, stats)


def save_image(img, path, stats: NormStats = DEFAULT_NORM) -> None:
    """Denormalize, clamp to [0, 255], and write an 8-bit PNG."""
    raw = denormalize(img, stats)
    raw = np.clip(np.rint(raw), 0, 255).astype(np.uint8)
    if raw.shape[2] == 1:
        pil = PILImage.fromarray(raw[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(raw, mode="RGB")
    pil.save(path, format="PNG")


def save_raw_image(arr, path) -> None:
    """Write an already-[0,255]-scaled array as PNG (clamped, no denormalize)."""
    raw = np.clip(np.rint(as_image(arr)), 0, 255).astype(np.uint8)
    if raw.shape[2] == 1:
        pil = PILImage.fromarray(raw[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(raw, mode="RGB")
    pil.save(path, format="PNG")
