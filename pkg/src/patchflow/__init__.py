"""Training-free exemplar texture synthesis by integrating a closed-form
patch velocity field, with a texture-optimization baseline and
patch-distribution metrics."""

from ._version import __version__
from .baseline import TOConfig, assignment_energy, to_iteration, to_synthesize
from .flow import (
    MemoryTable,
    compute_weights,
    euler_step,
    flow_step,
    knn,
    sample_candidates,
    velocity,
)
from .image import (
    DEFAULT_NORM,
    NormStats,
    as_image,
    denormalize,
    load_image,
    normalize,
    resize,
    save_image,
    save_raw_image,
)
from .manifest import RunManifest
from .metrics import (
    MetricReport,
    NoveltyMaps,
    autocorr_distance,
    compare,
    exact_w2,
    novelty_maps,
    sliced_wasserstein,
)
from .patches import (
    PatchSet,
    aggregate,
    extract_patches,
    gaussian_kernel,
    grid_positions,
    uniform_kernel,
)
from .synth import (
    BlendSpec,
    SynthConfig,
    renoise,
    scale_dims,
    synthesize,
    synthesize_blend,
    timestep_schedule,
)
from .textures import blue_noise_dots, checker, stripes

__all__ = [
    "__version__",
    "DEFAULT_NORM",
    "NormStats",
    "as_image",
    "normalize",
    "denormalize",
    "resize",
    "load_image",
    "save_image",
    "save_raw_image",
    "PatchSet",
    "grid_positions",
    "extract_patches",
    "gaussian_kernel",
    "uniform_kernel",
    "aggregate",
    "MemoryTable",
    "sample_candidates",
    "knn",
    "compute_weights",
    "velocity",
    "euler_step",
    "flow_step",
    "SynthConfig",
    "BlendSpec",
    "scale_dims",
    "timestep_schedule",
    "renoise",
    "synthesize",
    "synthesize_blend",
    "TOConfig",
    "assignment_energy",
    "to_iteration",
    "to_synthesize",
    "MetricReport",
    "NoveltyMaps",
    "sliced_wasserstein",
    "exact_w2",
    "autocorr_distance",
    "novelty_maps",
    "compare",
    "RunManifest",
    "stripes",
    "checker",
    "blue_noise_dots",
]
