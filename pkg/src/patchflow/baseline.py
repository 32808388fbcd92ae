"""Texture optimization baseline: alternating nearest-neighbor assignment
and overlap averaging.

E-step: each synthesis patch is assigned its exact nearest exemplar patch.
M-step: assigned patches are averaged back into the image with uniform
weights, which is the exact minimizer of the summed squared patch error for
a fixed assignment. The energy reported at each iteration is therefore
non-increasing while the patch size and scale stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import _topk_pool
from .image import as_image, resize
from .patches import PatchSet, aggregate, extract_patches, uniform_kernel
from .synth import scale_dims


@dataclass
class TOConfig:
    """Settings for one texture-optimization run.

    patch_sizes are visited in the given coarse-to-fine order at every
    pyramid level; sizes that do not fit the current image or exemplar are
    skipped at that level.
    """

    out_w: int
    out_h: int
    patch_sizes: tuple[int, ...] = (32, 16, 8)
    iterations: int = 10
    scales: int = 4
    ref_stride: int = 4
    seed: int = 0

    def validate(self) -> None:
        if not self.patch_sizes:
            raise ValueError("patch_sizes must not be empty")
        if any(p < 1 for p in self.patch_sizes):
            raise ValueError(f"patch sizes must be >= 1, got {self.patch_sizes}")
        if list(self.patch_sizes) != sorted(self.patch_sizes, reverse=True):
            raise ValueError(f"patch_sizes must be in decreasing order, got {self.patch_sizes}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.scales < 1:
            raise ValueError(f"scales must be >= 1, got {self.scales}")
        if self.ref_stride < 1:
            raise ValueError(f"ref_stride must be >= 1, got {self.ref_stride}")
        if min(self.out_w, self.out_h) < min(self.patch_sizes):
            raise ValueError(
                f"output {self.out_w}x{self.out_h} cannot fit any patch size in {self.patch_sizes}"
            )


def assignment_energy(patches: np.ndarray, ref_patches: np.ndarray, assign_idx: np.ndarray) -> float:
    """Summed squared error between patches and their assigned references."""
    patches = np.asarray(patches, dtype=np.float64)
    ref_patches = np.asarray(ref_patches, dtype=np.float64)
    assign_idx = np.asarray(assign_idx, dtype=np.int64)
    if assign_idx.shape[0] != patches.shape[0]:
        raise ValueError("one assignment per patch is required")
    diff = patches - ref_patches[assign_idx]
    return float(np.einsum("ij,ij->", diff, diff))


def to_iteration(
    x: np.ndarray,
    ref: PatchSet,
    patch_size: int,
    stride: int,
    workers: int = 1,
) -> tuple[np.ndarray, float]:
    """One assignment + averaging pass. Returns (new image, energy).

    The energy is evaluated on the input image under the fresh assignment,
    before the averaging step.
    """
    x = np.asarray(x, dtype=np.float64)
    pset = extract_patches(x, patch_size, stride)
    all_refs = np.arange(len(ref), dtype=np.int64)
    assign, _ = _topk_pool(pset.patches, ref.patches, all_refs, 1, workers=workers)
    assign = assign[:, 0]
    energy = assignment_energy(pset.patches, ref.patches, assign)
    nn_set = PatchSet(
        patch_size=patch_size, stride=stride, channels=pset.channels,
        patches=ref.patches[assign], coords=pset.coords,
    )
    x_new = aggregate(nn_set, uniform_kernel(patch_size), x.shape[0], x.shape[1])
    return x_new, energy


def to_synthesize(exemplar: np.ndarray, config: TOConfig, workers: int = 1) -> np.ndarray:
    """Full coarse-to-fine texture-optimization run from a noise start."""
    exemplar = as_image(exemplar)
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    channels = exemplar.shape[2]

    any_fit = False
    x: np.ndarray | None = None
    for s in range(config.scales - 1, -1, -1):
        w_s, h_s = scale_dims(config.out_w, config.out_h, s)
        if x is None:
            x = rng.standard_normal((h_s, w_s, channels))
        else:
            x = resize(x, w_s, h_s)
        ew, eh = scale_dims(exemplar.shape[1], exemplar.shape[0], s)
        ex_s = resize(exemplar, ew, eh)

        for p in config.patch_sizes:
            if p > min(w_s, h_s) or p > min(ew, eh):
                continue
            any_fit = True
            ref = extract_patches(ex_s, p, config.ref_stride)
            stride = max(1, p // 4)
            for _ in range(config.iterations):
                x, _ = to_iteration(x, ref, p, stride, workers=workers)
    if not any_fit:
        raise ValueError("no patch size fits at any scale; nothing was optimized")
    return x
