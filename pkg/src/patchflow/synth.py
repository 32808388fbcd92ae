"""Multi-scale texture synthesis by integrating the patch velocity field.

The image starts as Gaussian noise at the coarsest scale. At every scale the
patch flow is integrated with explicit Euler steps: extract overlapping
patches, evaluate the top-k mixture velocity per patch, blend the per-patch
velocities back into a dense field with a Gaussian kernel, and move the whole
image along it. Between scales the result is upsampled and partially
re-noised, and the time schedule restarts at the re-noise level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .flow import MemoryTable, flow_step, sample_candidates
from .image import as_image, resize
from .patches import PatchSet, aggregate, extract_patches, gaussian_kernel, grid_positions

# Called after every Euler update with (scale, step, t_reached, image).
# The image argument is live state and must not be mutated.
StepCallback = Callable[[int, int, float, np.ndarray], None]

BLEND_MODES = ("distribution", "pixel", "spatial")


@dataclass
class SynthConfig:
    """Settings for one synthesis run.

    stride and kernel_sigma default to patch_size // 4 and patch_size / 4
    when left as None. ref_stride is the sampling stride of the exemplar
    patch grid. gamma is both the re-noise retention factor and the restart
    time of the schedule at every scale after the first.
    """

    out_w: int
    out_h: int
    patch_size: int = 16
    stride: int | None = None
    ref_stride: int = 4
    scales: int = 4
    steps: int = 15
    k: int = 5
    gamma: float = 0.5
    ratio: float = 1.0
    memory: bool = True
    kernel_sigma: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.stride is None:
            self.stride = max(1, self.patch_size // 4)
        if self.kernel_sigma is None:
            self.kernel_sigma = self.patch_size / 4.0

    def validate(self) -> None:
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.ref_stride < 1:
            raise ValueError(f"ref_stride must be >= 1, got {self.ref_stride}")
        if self.scales < 1:
            raise ValueError(f"scales must be >= 1, got {self.scales}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0 < self.ratio <= 1:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.kernel_sigma <= 0:
            raise ValueError(f"kernel_sigma must be positive, got {self.kernel_sigma}")
        cw, ch = scale_dims(self.out_w, self.out_h, self.scales - 1)
        if min(cw, ch) < self.patch_size:
            raise ValueError(
                f"output {self.out_w}x{self.out_h} is smaller than one "
                f"{self.patch_size}px patch at the coarsest of {self.scales} scales"
            )


@dataclass
class BlendSpec:
    """How to mix two exemplars.

    distribution: synthesize against the union of both patch sets.
    pixel: mix the two velocity fields everywhere with weight alpha.
    spatial: mix them per patch, with alpha read from a map over the output.
    """

    mode: str = "pixel"
    alpha: float = 0.5
    alpha_map: np.ndarray | None = field(default=None, repr=False)

    def validate(self) -> None:
        if self.mode not in BLEND_MODES:
            raise ValueError(f"mode must be one of {BLEND_MODES}, got {self.mode!r}")
        if self.mode == "pixel" and not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.mode == "spatial":
            if self.alpha_map is None:
                raise ValueError("spatial mode needs an alpha_map")
            m = np.asarray(self.alpha_map, dtype=np.float64)
            if m.ndim != 2 or m.size == 0:
                raise ValueError("alpha_map must be a non-empty 2-D array")
            if not np.all(np.isfinite(m)) or m.min() < 0 or m.max() > 1:
                raise ValueError("alpha_map values must be finite and in [0, 1]")


def scale_dims(width: int, height: int, scale: int) -> tuple[int, int]:
    """Pixel dimensions at a pyramid level: size / 2**scale, rounded half up."""
    f = float(2**scale)
    return max(1, int(width / f + 0.5)), max(1, int(height / f + 0.5))


def timestep_schedule(steps: int, start: float = 0.0) -> np.ndarray:
    """steps+1 evenly spaced times from start to 1."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not 0 <= start < 1:
        raise ValueError(f"start must be in [0, 1), got {start}")
    return np.linspace(start, 1.0, steps + 1)


def renoise(x: np.ndarray, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """Blend the image with fresh unit Gaussian noise: gamma*x + (1-gamma)*eps."""
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    return gamma * x + (1.0 - gamma) * rng.standard_normal(x.shape)


def _spawn_rngs(seed: int):
    """Independent streams: image noise, pool sampling A, pool sampling B.

    Separate streams keep the noise sequence identical whether one or two
    exemplars are in play, so a pixel blend with alpha=1 reproduces the plain
    single-exemplar run bit for bit.
    """
    noise_seq, pool_a_seq, pool_b_seq = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(noise_seq),
        np.random.default_rng(pool_a_seq),
        np.random.default_rng(pool_b_seq),
    )


def _check_scale_fit(name: str, w: int, h: int, scales: int, patch_size: int) -> None:
    cw, ch = scale_dims(w, h, scales - 1)
    if min(cw, ch) < patch_size:
        raise ValueError(
            f"{name} ({w}x{h}) is smaller than one {patch_size}px patch "
            f"at the coarsest of {scales} scales"
        )


def _drive(
    channels: int,
    config: SynthConfig,
    make_step_fn,
    noise_rng: np.random.Generator,
    on_step: StepCallback | None,
) -> np.ndarray:
    """Shared multi-scale Euler loop.

    make_step_fn(scale, w, h) returns a closure (patches, t, t_next) ->
    per-patch velocities; everything else (noise, schedule, aggregation,
    image update) is identical across synthesis flavors.
    """
    p = config.patch_size
    kernel = gaussian_kernel(p, config.kernel_sigma)
    x: np.ndarray | None = None

    for s in range(config.scales - 1, -1, -1):
        w_s, h_s = scale_dims(config.out_w, config.out_h, s)
        if x is None:
            x = noise_rng.standard_normal((h_s, w_s, channels))
            ts = timestep_schedule(config.steps, 0.0)
        else:
            x = resize(x, w_s, h_s)
            x = renoise(x, config.gamma, noise_rng)
            ts = timestep_schedule(config.steps, config.gamma)

        step_fn = make_step_fn(s, w_s, h_s)
        for i in range(config.steps):
            t, t_next = float(ts[i]), float(ts[i + 1])
            pset = extract_patches(x, p, config.stride)
            vel = step_fn(pset.patches, t, t_next, pset.coords)
            vset = PatchSet(
                patch_size=p, stride=config.stride, channels=channels,
                patches=vel, coords=pset.coords,
            )
            v_img = aggregate(vset, kernel, h_s, w_s)
            x = x + (t_next - t) * v_img
            if on_step is not None:
                on_step(s, i, t_next, x)
    return x


def _grid_count(w: int, h: int, patch_size: int, stride: int) -> int:
    return len(grid_positions(h, patch_size, stride)) * len(grid_positions(w, patch_size, stride))


def synthesize(
    exemplar: np.ndarray,
    config: SynthConfig,
    workers: int = 1,
    on_step: StepCallback | None = None,
) -> np.ndarray:
    """Synthesize a new texture from one exemplar.

    The exemplar and the result are float images in normalized range, shape
    (H, W, C). Deterministic for a fixed config: the same seed gives the
    same output for any worker count.
    """
    exemplar = as_image(exemplar)
    config.validate()
    _check_scale_fit("exemplar", exemplar.shape[1], exemplar.shape[0], config.scales, config.patch_size)
    noise_rng, pool_rng, _ = _spawn_rngs(config.seed)
    p = config.patch_size

    def make_step_fn(s: int, w_s: int, h_s: int):
        ew, eh = scale_dims(exemplar.shape[1], exemplar.shape[0], s)
        ref = extract_patches(resize(exemplar, ew, eh), p, config.ref_stride)
        mem = MemoryTable(_grid_count(w_s, h_s, p, config.stride), config.k) if config.memory else None

        def step(psi, t, t_next, coords):
            pool = sample_candidates(ref, config.ratio, pool_rng)
            res = flow_step(psi, t, t_next, ref.patches, pool, config.k, mem, workers=workers)
            return res.velocities

        return step

    return _drive(exemplar.shape[2], config, make_step_fn, noise_rng, on_step)


def synthesize_blend(
    exemplar_a: np.ndarray,
    exemplar_b: np.ndarray,
    blend: BlendSpec,
    config: SynthConfig,
    workers: int = 1,
    on_step: StepCallback | None = None,
) -> np.ndarray:
    """Synthesize a texture that mixes two exemplars.

    distribution mode matches against both patch sets at once; pixel and
    spatial modes run two velocity evaluations and combine them, globally or
    through a per-pixel weight map (1 = exemplar A, 0 = exemplar B).
    """
    exemplar_a = as_image(exemplar_a)
    exemplar_b = as_image(exemplar_b)
    if exemplar_a.shape[2] != exemplar_b.shape[2]:
        raise ValueError("exemplars must have the same channel count")
    blend.validate()
    config.validate()
    for name, ex in (("exemplar_a", exemplar_a), ("exemplar_b", exemplar_b)):
        _check_scale_fit(name, ex.shape[1], ex.shape[0], config.scales, config.patch_size)
    noise_rng, pool_rng_a, pool_rng_b = _spawn_rngs(config.seed)
    p = config.patch_size

    alpha_map = None
    if blend.mode == "spatial":
        alpha_map = np.asarray(blend.alpha_map, dtype=np.float64)

    def make_step_fn(s: int, w_s: int, h_s: int):
        def refs_at(ex):
            ew, eh = scale_dims(ex.shape[1], ex.shape[0], s)
            return extract_patches(resize(ex, ew, eh), p, config.ref_stride)

        ref_a, ref_b = refs_at(exemplar_a), refs_at(exemplar_b)
        n_rows = _grid_count(w_s, h_s, p, config.stride)

        if blend.mode == "distribution":
            combined = np.vstack([ref_a.patches, ref_b.patches])
            mem = MemoryTable(n_rows, config.k) if config.memory else None

            def step(psi, t, t_next, coords):
                pool = sample_candidates(combined, config.ratio, pool_rng_a)
                res = flow_step(psi, t, t_next, combined, pool, config.k, mem, workers=workers)
                return res.velocities

            return step

        mem_a = MemoryTable(n_rows, config.k) if config.memory else None
        mem_b = MemoryTable(n_rows, config.k) if config.memory else None
        if blend.mode == "spatial":
            # Patch weights are read off a per-scale resize of the map at
            # each patch's center pixel.
            map_s = resize(alpha_map[:, :, None], w_s, h_s)[:, :, 0]
        half = p // 2

        def step(psi, t, t_next, coords):
            pool_a = sample_candidates(ref_a, config.ratio, pool_rng_a)
            pool_b = sample_candidates(ref_b, config.ratio, pool_rng_b)
            res_a = flow_step(psi, t, t_next, ref_a.patches, pool_a, config.k, mem_a, workers=workers)
            res_b = flow_step(psi, t, t_next, ref_b.patches, pool_b, config.k, mem_b, workers=workers)
            if blend.mode == "pixel":
                a = blend.alpha
                return a * res_a.velocities + (1.0 - a) * res_b.velocities
            a = map_s[coords[:, 0] + half, coords[:, 1] + half][:, None]
            return a * res_a.velocities + (1.0 - a) * res_b.velocities

        return step

    return _drive(exemplar_a.shape[2], config, make_step_fn, noise_rng, on_step)
