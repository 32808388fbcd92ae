"""Patch extraction and kernel-weighted patch aggregation.

A patch is a p x p sub-image vectorized channel-major then row-major:
element (c*p + i)*p + j holds channel c, row offset i, column offset j.
This order is fixed so nearest-neighbor distances are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .image import as_image


@dataclass
class PatchSet:
    """Vectorized patches plus the geometry needed to put them back.

    patches has shape (N, patch_size**2 * channels); coords has shape (N, 2)
    holding (row, col) top-left positions, unique and sorted row-major.
    """

    patch_size: int
    stride: int
    channels: int
    patches: np.ndarray
    coords: np.ndarray

    @property
    def dim(self) -> int:
        return self.patches.shape[1]

    def __len__(self) -> int:
        return self.patches.shape[0]


def grid_positions(extent: int, patch_size: int, stride: int) -> np.ndarray:
    """Top-left offsets {0, stride, 2*stride, ...} capped at extent - patch_size.

    Positions whose patch would cross the boundary are discarded.
    """
    last = extent - patch_size
    return np.arange(0, last + 1, stride, dtype=np.int64)


def extract_patches(img, patch_size: int, stride: int) -> PatchSet:
    """Extract all fully-interior patches on a stride grid.

    The count per axis is floor((extent - p) / stride) + 1.
    """
    img = as_image(img)
    h, w, c = img.shape
    if patch_size < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    if patch_size > min(h, w):
        raise ValueError(f"patch_size {patch_size} exceeds image side {h}x{w}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")

    rows = grid_positions(h, patch_size, stride)
    cols = grid_positions(w, patch_size, stride)
    # (H-p+1, W-p+1, C, p, p) view; subsample the grid, no copy until reshape.
    windows = sliding_window_view(img, (patch_size, patch_size), axis=(0, 1))
    sel = windows[rows[:, None], cols[None, :]]
    n = len(rows) * len(cols)
    patches = sel.reshape(n, c * patch_size * patch_size)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    coords = np.stack([rr.ravel(), cc.ravel()], axis=1)
    return PatchSet(patch_size, stride, c, np.ascontiguousarray(patches), coords)


def gaussian_kernel(patch_size: int, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian weights over a p x p patch footprint.

    Offsets are measured from the patch center, half-pixel centered for even
    p, so the kernel is symmetric under horizontal/vertical flips.
    Normalization happens inside :func:`aggregate`.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if patch_size < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    d = np.arange(patch_size) - (patch_size - 1) / 2.0
    sq = d * d
    return np.exp(-(sq[:, None] + sq[None, :]) / (2.0 * sigma * sigma))


def uniform_kernel(patch_size: int) -> np.ndarray:
    return np.ones((patch_size, patch_size))


def aggregate(pset: PatchSet, kernel: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Blend patch vectors into an image by kernel-weighted per-pixel averaging.

    Every output pixel is sum(kernel_weight * patch_value) / sum(kernel_weight)
    over the patches covering it. Pixels covered by no patch (a border strip
    when the stride grid stops short of the edge) are filled from the nearest
    covered pixel.
    """
    if len(pset) == 0:
        raise ValueError("cannot aggregate an empty patch set")
    p, c = pset.patch_size, pset.channels
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (p, p):
        raise ValueError(f"kernel shape {kernel.shape} does not match patch size {p}")
    if not np.all(kernel > 0):
        raise ValueError("kernel weights must be strictly positive")
    rows = pset.coords[:, 0]
    cols = pset.coords[:, 1]
    if rows.min() < 0 or cols.min() < 0 or rows.max() + p > out_h or cols.max() + p > out_w:
        raise ValueError("patch coordinates fall outside the output image")
    flat = rows * out_w + cols
    if np.unique(flat).size != flat.size:
        raise ValueError("patch coordinates must be unique")

    vals = pset.patches.reshape(len(pset), c, p, p)
    acc = np.zeros((out_h, out_w, c))
    wsum = np.zeros((out_h, out_w))
    # For a fixed in-patch offset each patch hits a distinct pixel (coords are
    # unique), so plain fancy-indexed += is safe.
    for oy in range(p):
        for ox in range(p):
            kw = kernel[oy, ox]
            acc[rows + oy, cols + ox, :] += kw * vals[:, :, oy, ox]
            wsum[rows + oy, cols + ox] += kw

    covered = wsum > 0
    out = np.zeros_like(acc)
    out[covered] = acc[covered] / wsum[covered, None]
    if not covered.all():
        # Nearest-covered fill via a distance transform on the uncovered mask.
        idx = ndimage.distance_transform_edt(~covered, return_distances=False, return_indices=True)
        out = out[idx[0], idx[1]]
    return out
