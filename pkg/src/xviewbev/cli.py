"""Command-line entry point: ``xviewbev {synth,project,compare,eval,alpha,fuse}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .fusion import fuse_aligned
from .guidance import FootprintMask, build_alpha_grid
from .pipeline import (
    RunConfig,
    StageError,
    run_compare,
    run_eval,
    run_project_batch,
    tile_center,
    validate_manifests,
    write_synthetic,
)
from .synthetic import SyntheticScene, canonical_box_scene

log = logging.getLogger("xviewbev")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="newline-delimited JSON pair manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--size", type=int)
    p.add_argument("--extent", type=float)
    p.add_argument("--d0", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--mode", choices=["sgr", "dgr", "none"])
    p.add_argument("--reduction", choices=["first", "mean", "max_height"])
    p.add_argument("--camera-height", type=float, dest="camera_height")
    p.add_argument("--depth-scale", type=float, dest="depth_scale")
    p.add_argument("--fixed-alpha", type=float, dest="fixed_alpha")
    p.add_argument("--workers", type=int)


def _config_from(args) -> RunConfig:
    keys = ("size", "extent", "d0", "t", "mode", "reduction", "camera_height",
            "depth_scale", "fixed_alpha", "workers")
    return RunConfig.load(args.config, **{k: getattr(args, k, None) for k in keys})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xviewbev", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene to a ready-to-project pair")
    p.add_argument("--out", required=True)
    p.add_argument("--scene", help="scene JSON; defaults to the canonical one-box scene")
    p.add_argument("--pano-height", type=int, default=512)
    p.add_argument("--pano-width", type=int, default=1024)
    p.add_argument("--pair-id", default="synthetic")

    _add_run_flags(sub.add_parser("project", help="depth -> reprojection -> BEV rasters"))
    _add_run_flags(sub.add_parser("compare", help="ST / GP / naive BEV / SGR side-by-side image"))

    p = sub.add_parser("eval", help="mIoU and accuracy over matched label PNGs")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--classes", help="comma-separated class names")
    group.add_argument("--num-classes", type=int)
    p.add_argument("--ignore-label", type=int)
    p.add_argument("--out", help="write the metrics record here instead of stdout")

    p = sub.add_parser("alpha", help="dump the 3x3 ratio and coefficient grids of a footprint")
    p.add_argument("--footprint", required=True)
    p.add_argument("--gsd", type=float, default=70.0 / 256)
    p.add_argument("--t", type=float, default=20.0)
    p.add_argument("--offset-east", type=float, default=0.0)
    p.add_argument("--offset-north", type=float, default=0.0)

    p = sub.add_parser("fuse", help="warp + concatenate + gate + project CVBR feature maps")
    p.add_argument("--bev", required=True)
    p.add_argument("--sat", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--weights", required=True,
                   help="directory with proj_weight.cvbr, proj_bias.cvbr and optional gate_*.cvbr")
    p.add_argument("--out", required=True)
    return parser


def _cmd_synth(args) -> None:
    if args.scene:
        scene = SyntheticScene.from_dict(json.loads(Path(args.scene).read_text()))
    else:
        scene = canonical_box_scene((args.pano_height, args.pano_width))
    entry = write_synthetic(scene, args.out, args.pair_id)
    print(Path(args.out) / "manifest.jsonl")
    log.info("wrote pair %s", entry.pair_id)


def _cmd_project(args) -> None:
    config = _config_from(args)
    entries = io.read_manifests(args.manifest)
    for outputs in run_project_batch(entries, config, args.out):
        print(outputs["run_json"])


def _cmd_compare(args) -> None:
    config = _config_from(args)
    entries = io.read_manifests(args.manifest)
    validate_manifests(entries)
    for entry in entries:
        print(run_compare(entry, config, args.out))


def _cmd_eval(args) -> None:
    names = args.classes.split(",") if args.classes else [str(k) for k in range(args.num_classes)]
    record = run_eval(args.pred, args.gt, names, args.ignore_label)
    text = json.dumps(record, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(record["table"])
    print(f"mIoU {record['miou']:.2f}  Acc {record['acc']:.2f}")


def _cmd_alpha(args) -> None:
    mask = io.load_mask_png(args.footprint)
    center = tile_center(mask.shape[0], args.gsd, args.offset_east, args.offset_north)
    grid = build_alpha_grid(FootprintMask(mask, args.gsd, center), args.t)
    print(json.dumps(grid.to_dict(), indent=2))


def _flatten_matrix(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[-2], a.shape[-1])


def _cmd_fuse(args) -> None:
    wdir = Path(args.weights)
    proj_w = _flatten_matrix(io.read_cvbr(wdir / "proj_weight.cvbr"))
    proj_b = io.read_cvbr(wdir / "proj_bias.cvbr").ravel()
    gate_w = gate_b = None
    if (wdir / "gate_weight.cvbr").exists():
        gate_w = _flatten_matrix(io.read_cvbr(wdir / "gate_weight.cvbr"))
        gate_b = io.read_cvbr(wdir / "gate_bias.cvbr").ravel()
    out = fuse_aligned(
        io.read_cvbr(args.bev), io.read_cvbr(args.sat), io.read_cvbr(args.flow),
        proj_w, proj_b, gate_w, gate_b,
    )
    io.write_cvbr(args.out, out.astype(np.float64))


COMMANDS = {
    "synth": _cmd_synth,
    "project": _cmd_project,
    "compare": _cmd_compare,
    "eval": _cmd_eval,
    "alpha": _cmd_alpha,
    "fuse": _cmd_fuse,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
