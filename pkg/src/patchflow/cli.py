"""Command-line interface.

Subcommands: synth (flow synthesis), to (texture-optimization baseline),
blend (two-exemplar synthesis), metrics (compare two images), ablate
(sweep k / candidate ratio / memory and report patch-distribution error).

Every command writes a key=value manifest next to its primary output and
prints the wall-clock time. Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ._version import __version__
from .baseline import TOConfig, to_synthesize
from .image import NormStats, load_image, save_image, save_raw_image
from .manifest import RunManifest
from .metrics import compare, sliced_wasserstein
from .patches import extract_patches
from .synth import BLEND_MODES, BlendSpec, SynthConfig, synthesize, synthesize_blend

ABLATE_K = (1, 2, 5, 10)
ABLATE_RATIO = (0.05, 0.1, 0.25, 1.0)

# Alpha maps are stored as 8-bit PNGs; this scales them to [0, 1] on load.
_UNIT_NORM = NormStats(shift=0.0, scale=255.0)


def _manifest_path(out_path: str) -> Path:
    p = Path(out_path)
    return p.with_name(p.name + ".manifest.txt")


def _write_manifest(command: str, params: dict, inputs: dict, outputs: dict,
                    duration: float, anchor: str) -> None:
    man = RunManifest(command=command, params=params, inputs=inputs,
                      outputs=outputs, duration_s=duration)
    man.write(_manifest_path(anchor))


def _add_synth_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--width", type=int, default=None, help="output width (default: exemplar width)")
    sp.add_argument("--height", type=int, default=None, help="output height (default: exemplar height)")
    sp.add_argument("--scales", type=int, default=4)
    sp.add_argument("--patch-size", type=int, default=16)
    sp.add_argument("--stride", type=int, default=None, help="synthesis patch stride (default: patch size / 4)")
    sp.add_argument("--ref-stride", type=int, default=4, help="exemplar patch stride")
    sp.add_argument("--k", type=int, default=5, help="nearest neighbors per patch")
    sp.add_argument("--steps", type=int, default=15, help="Euler steps per scale")
    sp.add_argument("--gamma", type=float, default=0.5, help="re-noise level between scales")
    sp.add_argument("--ratio", type=float, default=1.0, help="candidate subsampling ratio")
    sp.add_argument("--memory", choices=("on", "off"), default="on")
    sp.add_argument("--kernel-sigma", type=float, default=None,
                    help="aggregation kernel width (default: patch size / 4)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1, help="worker threads for the patch search")


def _synth_config(args, ref_img) -> SynthConfig:
    w = args.width if args.width is not None else ref_img.shape[1]
    h = args.height if args.height is not None else ref_img.shape[0]
    return SynthConfig(
        out_w=w, out_h=h, patch_size=args.patch_size, stride=args.stride,
        ref_stride=args.ref_stride, scales=args.scales, steps=args.steps,
        k=args.k, gamma=args.gamma, ratio=args.ratio,
        memory=args.memory == "on", kernel_sigma=args.kernel_sigma,
        seed=args.seed,
    )


def _debug_callback(debug_dir: str | None):
    if debug_dir is None:
        return None
    d = Path(debug_dir)
    d.mkdir(parents=True, exist_ok=True)

    def snap(scale: int, step: int, t: float, img: np.ndarray) -> None:
        save_image(img, d / f"scale{scale}_step{step:02d}.png")

    return snap


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    ref = load_image(args.ref)
    cfg = _synth_config(args, ref)
    out = synthesize(ref, cfg, workers=args.threads, on_step=_debug_callback(args.debug_dir))
    save_image(out, args.out)
    dt = time.perf_counter() - t0
    params = asdict(cfg) | {"threads": args.threads}
    _write_manifest("synth", params, {"ref": args.ref}, {"image": args.out}, dt, args.out)
    print(f"wrote {args.out} ({dt:.2f} s)")
    return 0


def cmd_to(args) -> int:
    t0 = time.perf_counter()
    ref = load_image(args.ref)
    w = args.width if args.width is not None else ref.shape[1]
    h = args.height if args.height is not None else ref.shape[0]
    cfg = TOConfig(
        out_w=w, out_h=h, patch_sizes=tuple(args.patch_sizes),
        iterations=args.iterations, scales=args.scales,
        ref_stride=args.ref_stride, seed=args.seed,
    )
    out = to_synthesize(ref, cfg, workers=args.threads)
    save_image(out, args.out)
    dt = time.perf_counter() - t0
    params = asdict(cfg) | {"threads": args.threads}
    _write_manifest("to", params, {"ref": args.ref}, {"image": args.out}, dt, args.out)
    print(f"wrote {args.out} ({dt:.2f} s)")
    return 0


def cmd_blend(args) -> int:
    t0 = time.perf_counter()
    ref_a = load_image(args.ref_a)
    ref_b = load_image(args.ref_b)
    cfg = _synth_config(args, ref_a)
    alpha_map = None
    if args.alpha_map is not None:
        alpha_map = load_image(args.alpha_map, _UNIT_NORM)[:, :, 0]
    spec = BlendSpec(mode=args.mode, alpha=args.alpha, alpha_map=alpha_map)
    out = synthesize_blend(ref_a, ref_b, spec, cfg, workers=args.threads,
                           on_step=_debug_callback(args.debug_dir))
    save_image(out, args.out)
    dt = time.perf_counter() - t0
    params = asdict(cfg) | {
        "threads": args.threads, "mode": args.mode, "alpha": args.alpha,
        "alpha_map": args.alpha_map if args.alpha_map is not None else "",
    }
    inputs = {"ref_a": args.ref_a, "ref_b": args.ref_b}
    if args.alpha_map is not None:
        inputs["alpha_map"] = args.alpha_map
    _write_manifest("blend", params, inputs, {"image": args.out}, dt, args.out)
    print(f"wrote {args.out} ({dt:.2f} s)")
    return 0


def cmd_metrics(args) -> int:
    t0 = time.perf_counter()
    ref = load_image(args.ref)
    img = load_image(args.image)
    report, nov = compare(
        ref, img, patch_size=args.patch_size, novelty_stride=args.stride,
        projections=args.projections, seed=args.seed, workers=args.threads,
    )

    maps_dir = Path(args.maps_dir) if args.maps_dir else Path(args.csv).parent
    maps_dir.mkdir(parents=True, exist_ok=True)
    dist = nov.nn_distance
    peak = dist.max()
    dist_vis = dist / peak * 255.0 if peak > 0 else dist
    coords_vis = np.concatenate(
        [nov.nn_coords * 255.0, np.zeros_like(nov.nn_coords[:, :, :1])], axis=2
    )
    mask_vis = nov.novel_mask.astype(np.float64) * 255.0
    for name, arr in (("nn_distance", dist_vis), ("nn_coords", coords_vis), ("novel_mask", mask_vis)):
        path = maps_dir / f"{name}.png"
        save_raw_image(arr if arr.ndim == 3 else arr[:, :, None], path)
        report.map_paths[name] = str(path)

    report.write_csv(args.csv)
    dt = time.perf_counter() - t0
    params = {
        "patch_size": args.patch_size, "stride": args.stride,
        "projections": args.projections, "seed": args.seed, "threads": args.threads,
    }
    outputs = {"csv": args.csv} | report.map_paths
    _write_manifest("metrics", params, {"ref": args.ref, "image": args.image}, outputs, dt, args.csv)
    print(f"wrote {args.csv} ({dt:.2f} s)")
    return 0


def cmd_ablate(args) -> int:
    t0 = time.perf_counter()
    ref = load_image(args.ref)
    base = _synth_config(args, ref)
    p = base.patch_size
    ref_np = extract_patches(ref, p, p)

    # Per-row wall times go to stdout only; the CSV must be bit-identical
    # across repeat runs.
    rows = []
    for k in ABLATE_K:
        for ratio in ABLATE_RATIO:
            for mem in (True, False):
                cfg = SynthConfig(
                    out_w=base.out_w, out_h=base.out_h, patch_size=p,
                    stride=base.stride, ref_stride=base.ref_stride,
                    scales=base.scales, steps=base.steps, k=k,
                    gamma=base.gamma, ratio=ratio, memory=mem,
                    kernel_sigma=base.kernel_sigma, seed=base.seed,
                )
                r0 = time.perf_counter()
                out = synthesize(ref, cfg, workers=args.threads)
                r_dt = time.perf_counter() - r0
                out_np = extract_patches(out, p, p)
                sw = sliced_wasserstein(out_np, ref_np, args.projections,
                                        np.random.default_rng(args.seed))
                mem_s = "on" if mem else "off"
                rows.append((k, ratio, mem_s, sw))
                print(f"k={k} ratio={ratio} memory={mem_s}: sw={sw:.6g} ({r_dt:.2f} s)")

    with open(args.csv, "w", newline="") as fh:
        fh.write("k,ratio,memory,sliced_wasserstein\n")
        for k, ratio, mem_s, sw in rows:
            fh.write(f"{k},{ratio},{mem_s},{sw:.10g}\n")

    dt = time.perf_counter() - t0
    params = asdict(base) | {
        "threads": args.threads, "projections": args.projections,
        "sweep_k": ",".join(map(str, ABLATE_K)),
        "sweep_ratio": ",".join(map(str, ABLATE_RATIO)),
        "sweep_memory": "on,off",
    }
    # The sweep overrides k/ratio/memory per row; drop them from the base.
    for key in ("k", "ratio", "memory"):
        params.pop(key)
    _write_manifest("ablate", params, {"ref": args.ref}, {"csv": args.csv}, dt, args.csv)
    print(f"wrote {args.csv} ({dt:.2f} s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchflow",
                                     description="Exemplar-based texture synthesis by patch flow integration")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="synthesize a texture from one exemplar")
    sp.add_argument("--ref", required=True, help="exemplar image path")
    sp.add_argument("--out", required=True, help="output PNG path")
    _add_synth_flags(sp)
    sp.add_argument("--debug-dir", default=None, help="write a snapshot PNG after every step")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("to", help="texture-optimization baseline")
    sp.add_argument("--ref", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--width", type=int, default=None)
    sp.add_argument("--height", type=int, default=None)
    sp.add_argument("--patch-sizes", type=lambda s: [int(v) for v in s.split(",")],
                    default=[32, 16, 8], help="comma-separated, decreasing")
    sp.add_argument("--iterations", type=int, default=10)
    sp.add_argument("--scales", type=int, default=4)
    sp.add_argument("--ref-stride", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_to)

    sp = sub.add_parser("blend", help="synthesize from two exemplars")
    sp.add_argument("--ref-a", required=True)
    sp.add_argument("--ref-b", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mode", choices=BLEND_MODES, default="pixel")
    sp.add_argument("--alpha", type=float, default=0.5, help="weight of exemplar A in pixel mode")
    sp.add_argument("--alpha-map", default=None,
                    help="grayscale PNG; white selects exemplar A (spatial mode)")
    _add_synth_flags(sp)
    sp.add_argument("--debug-dir", default=None)
    sp.set_defaults(func=cmd_blend)

    sp = sub.add_parser("metrics", help="compare an image against a reference")
    sp.add_argument("--ref", required=True, help="reference image")
    sp.add_argument("--image", required=True, help="image to evaluate")
    sp.add_argument("--csv", required=True, help="output CSV path")
    sp.add_argument("--maps-dir", default=None, help="directory for diagnostic PNGs (default: CSV directory)")
    sp.add_argument("--patch-size", type=int, default=16)
    sp.add_argument("--stride", type=int, default=8, help="novelty-map patch stride")
    sp.add_argument("--projections", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("ablate", help="sweep k, candidate ratio, and memory")
    sp.add_argument("--ref", required=True)
    sp.add_argument("--csv", required=True, help="output CSV path")
    _add_synth_flags(sp)
    sp.add_argument("--projections", type=int, default=64)
    sp.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
