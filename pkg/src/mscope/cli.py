"""Command-line interface.

Subcommands: synth, patches, transform, dist, ph, betti, report, compare.
Exit codes: 0 ok, 2 config error, 3 capacity error, 4 I/O error.
Set MSCOPE_THREADS to cap distance-matrix parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .cloud import distance_matrix, load_dmat, save_dmat
from .errors import CapacityError, ConfigError, DimensionError, FormatError
from .imgio import bicubic_resample, load_cloud, load_image, save_cloud, save_image
from .persistence import betti_curve, h0_barcode, reduce_filtration, rips_filtration
from .pipeline import (
    ExperimentConfig,
    build_manifold,
    compare_manifolds,
    load_bundle,
    read_barcode_csv,
    run_experiment,
    synth_cloud,
    write_barcode_csv,
    write_betti_csv,
)
from .transforms import (
    copy_ch,
    pixel_shuffle_compose,
    pixel_shuffle_decompose,
    wavelet_stack,
    wavelet_unstack,
)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=("denoise", "sr_bicubic", "sr_unknown"),
                   default="denoise")
    p.add_argument("--domain", choices=("image", "wavelet", "pixelshuffle"),
                   default="image")
    p.add_argument("--target",
                   choices=("input_manifold", "label_original", "label_residual"),
                   default="label_residual")
    p.add_argument("--patch", type=int, default=20)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--sigma", type=float, default=None,
                   help="noise std in 8-bit units (denoise task)")
    p.add_argument("--scale", type=int, default=None,
                   help="super-resolution factor (sr tasks)")
    p.add_argument("--metric", choices=("L2", "CORR"), default=None)
    p.add_argument("--normalized", action="store_true",
                   help="divide L2 distances by sqrt(d)")
    p.add_argument("--eps-max", type=float, default=None,
                   help="filtration cap; enables H1 via the Rips complex")
    p.add_argument("--grid", type=int, default=256,
                   help="number of Betti-curve samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--images", nargs="+", required=True, help="input image files")


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        task=args.task,
        domain=args.domain,
        target=args.target,
        patch=args.patch,
        count=args.count,
        sigma8bit=args.sigma,
        scale=args.scale,
        seed=args.seed,
        metric=args.metric,
        normalized=args.normalized,
        eps_max=args.eps_max,
        grid_points=args.grid,
    )


def _load_stack(path: str) -> np.ndarray:
    if path.endswith(".npz"):
        with np.load(path) as data:
            return data["stack"]
    return load_image(path)


def _save_stack(arr: np.ndarray, path: str) -> None:
    if path.endswith(".npz"):
        np.savez(path, stack=np.asarray(arr, dtype=np.float64))
    else:
        save_image(arr, path)


def _cmd_synth(args) -> int:
    cloud = synth_cloud(args.shape, args.count, args.noise, args.seed)
    save_cloud(cloud, args.out)
    print(f"wrote {args.out}: {cloud.n} points in R^{cloud.d}")
    return 0


def _cmd_patches(args) -> int:
    images = [load_image(p) for p in args.images]
    cloud = build_manifold(_config_from_args(args), images)
    save_cloud(cloud, args.out)
    print(f"wrote {args.out}: {cloud.n} points in R^{cloud.d}")
    return 0


def _cmd_transform(args) -> int:
    scale = args.scale if args.scale is not None else 2
    src = _load_stack(args.input)
    if args.op == "wt":
        out = wavelet_stack(src)
    elif args.op == "iwt":
        out = wavelet_unstack(src)
    elif args.op == "ps":
        out = pixel_shuffle_decompose(src, scale)
    elif args.op == "ips":
        out = pixel_shuffle_compose(src, scale)
    elif args.op == "copych":
        out = copy_ch(src, scale)
    else:  # bu
        out = bicubic_resample(src, float(args.factor), antialias=not args.no_antialias)
    _save_stack(out, args.out)
    print(f"wrote {args.out}: shape {tuple(out.shape)}")
    return 0


def _cmd_dist(args) -> int:
    cloud = load_cloud(args.cloud)
    dm = distance_matrix(cloud, args.metric or "L2", args.normalized)
    save_dmat(dm, args.out)
    print(f"wrote {args.out}: {dm.n}x{dm.n} {dm.metric}"
          f"{' normalized' if dm.normalized else ''}")
    return 0


def _cmd_ph(args) -> int:
    dm = load_dmat(args.dmat)
    if args.eps_max is not None:
        diag = reduce_filtration(rips_filtration(dm, args.eps_max))
    else:
        diag = h0_barcode(dm)
    write_barcode_csv(diag, args.out)
    n0 = int(np.count_nonzero(diag.dims == 0))
    n1 = int(np.count_nonzero(diag.dims == 1))
    print(f"wrote {args.out}: {n0} H0 bars, {n1} H1 bars")
    return 0


def _cmd_betti(args) -> int:
    diag = read_barcode_csv(args.barcode)
    if args.eps_max is not None:
        cap = args.eps_max
    else:
        finite = diag.deaths[np.isfinite(diag.deaths)]
        cap = float(finite.max()) if finite.size else 1.0
    curve = betti_curve(diag, np.linspace(0.0, cap, args.grid))
    write_betti_csv(curve, args.out)
    print(f"wrote {args.out}: {args.grid} samples on [0, {cap:g}]")
    return 0


def _cmd_report(args) -> int:
    images = [load_image(p) for p in args.images]
    bundle = run_experiment(_config_from_args(args), images, args.out)
    s = bundle.summary
    print(f"wrote {args.out}: n={s['n_points']} d={s['dim']} "
          f"auc_beta0={s['auc_beta0']:.6g} "
          f"merge50={s['merge_eps']['0.5']:.6g} "
          f"full_merge={s['full_merge_eps']:.6g}")
    return 0


def _cmd_compare(args) -> int:
    verdict = compare_manifolds(load_bundle(args.bundle_a), load_bundle(args.bundle_b))
    payload = {
        "verdict": verdict.verdict,
        "auc_beta0": list(verdict.auc_beta0),
        "merge_eps_half": list(verdict.merge_eps_half),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mscope",
        description="Topological complexity of image-patch manifolds: "
                    "barcodes and Betti curves under wavelet / sub-pixel mappings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a synthetic reference manifold")
    p.add_argument("--shape", choices=("circle", "sphere", "blob", "two_blobs"),
                   required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("patches", help="build a patch cloud from images")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_patches)

    p = sub.add_parser("transform", help="apply one feature-space mapping")
    p.add_argument("op", choices=("wt", "iwt", "ps", "ips", "copych", "bu"))
    p.add_argument("input", help="PNG/PGM image or .npz stack")
    p.add_argument("--scale", type=int, default=None,
                   help="sub-pixel factor for ps/ips/copych (default 2)")
    p.add_argument("--factor", type=float, default=2.0,
                   help="resampling factor for bu")
    p.add_argument("--no-antialias", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("dist", help="pairwise distance matrix of a cloud")
    p.add_argument("cloud")
    p.add_argument("--metric", choices=("L2", "CORR"), default="L2")
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dist)

    p = sub.add_parser("ph", help="persistence barcode of a distance matrix")
    p.add_argument("dmat")
    p.add_argument("--eps-max", type=float, default=None,
                   help="cap the filtration and compute H1 (omit for H0 only)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ph)

    p = sub.add_parser("betti", help="Betti curves from a barcode CSV")
    p.add_argument("barcode")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--eps-max", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_betti)

    p = sub.add_parser("report", help="full experiment run with artifacts")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("compare", help="compare two report bundles")
    p.add_argument("bundle_a", help="summary.json of run A")
    p.add_argument("bundle_b", help="summary.json of run B")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def run() -> None:
    sys.exit(main())
