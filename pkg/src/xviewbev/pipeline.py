"""End-to-end runs: manifest entries in, BEV rasters and metrics out."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .bev import BaselineMode, BevGrid, BevGridSpec, Reduction, ground_plane_project, rasterize, translate
from .evaluation import ConfusionMatrix, accumulate, accuracy, miou, per_class_table
from .guidance import FootprintMask, build_alpha_grid
from .io import PairManifest
from .panorama import PanoramaDepth, compute_angle_grid, depth_to_points
from .reprojection import Mode, ReprojectionConfig, reproject
from .synthetic import PALETTE, SyntheticScene, render_synthetic

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class RunConfig:
    size: int = 256
    extent: float = 70.0
    d0: float = 10.0
    t: float = 20.0
    mode: str = "sgr"
    reduction: str = "max_height"
    camera_height: Optional[float] = None  # None: take it from the manifest
    depth_scale: float = io.DEFAULT_DEPTH_SCALE
    fixed_alpha: float = 15.0
    workers: int = 1

    def __post_init__(self) -> None:
        Mode(self.mode)
        Reduction(self.reduction)
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not self.depth_scale > 0:
            raise ValueError("depth_scale must be positive")

    @classmethod
    def load(cls, path=None, **overrides) -> "RunConfig":
        data = {}
        if path is not None:
            data = json.loads(Path(path).read_text())
            unknown = set(data) - {f.name for f in fields(cls)}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    @property
    def grid_spec(self) -> BevGridSpec:
        return BevGridSpec(self.size, self.extent, Reduction(self.reduction))

    @property
    def reprojection(self) -> ReprojectionConfig:
        return ReprojectionConfig(d0=self.d0, mode=Mode(self.mode), fixed_alpha=self.fixed_alpha)

    def echo(self) -> dict:
        """Settings that influence outputs (worker count deliberately excluded)."""
        d = asdict(self)
        d.pop("workers")
        return d


def interior_coverage(grid: BevGrid, interior) -> float:
    """Fraction of interior-mask cells that received a point (NaN for an empty mask)."""
    interior = np.asarray(interior) != 0
    if interior.shape != grid.src_row.shape:
        raise ValueError(f"interior mask {interior.shape} does not match grid {grid.src_row.shape}")
    n = int(interior.sum())
    if n == 0:
        return float("nan")
    return int((grid.occupied & interior).sum()) / n


def tile_center(tile_size: int, gsd: float, offset_east: float, offset_north: float) -> tuple[float, float]:
    """Camera position in tile pixel coordinates ``(col, row)``."""
    c = (tile_size - 1) / 2.0
    return c + offset_east / gsd, c - offset_north / gsd


def project_depth(
    depth: PanoramaDepth,
    payload: Optional[np.ndarray],
    footprint: Optional[FootprintMask],
    config: RunConfig,
    mode: Optional[str] = None,
) -> BevGrid:
    """Depth -> points -> reprojection -> camera-centred raster."""
    rcfg = config.reprojection if mode is None else replace(config.reprojection, mode=Mode(mode))
    cloud = depth_to_points(depth, compute_angle_grid(depth.height, depth.width))
    if payload is not None:
        cloud = cloud.with_payload(payload)
    alpha_grid = None
    if rcfg.mode is Mode.SGR:
        if footprint is None:
            raise StageError("reproject", "SGR mode needs a footprint mask")
        alpha_grid = build_alpha_grid(footprint, config.t)
    moved = reproject(cloud, rcfg, alpha_grid, footprint)
    return rasterize(moved, config.grid_spec)


@dataclass
class PairInputs:
    depth: PanoramaDepth
    panorama: np.ndarray
    footprint: FootprintMask
    camera_height: float


def validate_manifests(entries: Sequence[PairManifest]) -> None:
    missing = [
        f"{e.pair_id}: {name}={p}"
        for e in entries
        for name, p in e.paths().items()
        if not Path(p).is_file()
    ]
    if missing:
        raise StageError("manifest", "missing files: " + "; ".join(missing))


def load_pair(entry: PairManifest, config: RunConfig) -> PairInputs:
    validate_manifests([entry])
    try:
        depth = io.load_depth_png(entry.depth_path, config.depth_scale)
        panorama = io.load_image(entry.panorama_path)
        mask = io.load_mask_png(entry.footprint_path)
    except (ValueError, OSError) as exc:
        raise StageError("load", str(exc)) from exc
    if panorama.shape[:2] != depth.depth.shape:
        raise StageError("load", f"{entry.pair_id}: panorama {panorama.shape[:2]} and depth "
                                 f"{depth.depth.shape} differ in size")
    if mask.shape != (entry.tile_size, entry.tile_size):
        raise StageError("load", f"{entry.pair_id}: footprint is {mask.shape}, manifest says "
                                 f"{entry.tile_size}x{entry.tile_size}")
    center = tile_center(entry.tile_size, entry.gsd, entry.offset_east, entry.offset_north)
    try:
        footprint = FootprintMask(mask, entry.gsd, center)
    except ValueError as exc:
        raise StageError("load", f"{entry.pair_id}: {exc}") from exc
    camera_height = config.camera_height if config.camera_height is not None else entry.camera_height
    return PairInputs(depth, panorama, footprint, camera_height)


def _payload_raster(grid: BevGrid) -> np.ndarray:
    """(C, S, S) float32 payload with NaN in empty cells."""
    v = grid.value.astype(np.float32)
    if v.ndim == 2:
        v = v[None]
    else:
        v = np.moveaxis(v, -1, 0)
    v = np.where(grid.occupied[None], v, np.float32(np.nan))
    return np.ascontiguousarray(v, dtype=np.float32)


def _payload_image(grid: BevGrid) -> np.ndarray:
    occupied = grid.occupied if grid.value.ndim == 2 else grid.occupied[..., None]
    return np.where(occupied, grid.value, 0)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_project(entry: PairManifest, config: RunConfig, out_dir) -> dict:
    """Project one pair and write its raster outputs plus a run record.

    Outputs, all prefixed by the pair id: ``_bev.png`` (8-bit payload, empty
    cells 0), ``_bev.cvbr`` (float32 payload, empty cells NaN),
    ``_count.cvbr`` (float32 points per cell) and ``_run.json``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = load_pair(entry, config)
    try:
        grid = project_depth(inputs.depth, inputs.panorama, inputs.footprint, config)
    except (ValueError, TypeError) as exc:
        raise StageError("project", f"{entry.pair_id}: {exc}") from exc
    grid = translate(grid, entry.offset_east, entry.offset_north)

    stem = out_dir / entry.pair_id
    outputs = {
        "bev_png": Path(f"{stem}_bev.png"),
        "bev_cvbr": Path(f"{stem}_bev.cvbr"),
        "count_cvbr": Path(f"{stem}_count.cvbr"),
    }
    try:
        io.save_image(outputs["bev_png"], _payload_image(grid))
        io.write_cvbr(outputs["bev_cvbr"], _payload_raster(grid))
        io.write_cvbr(outputs["count_cvbr"], grid.count.astype(np.float32))
    except (OSError, ValueError) as exc:
        raise StageError("write", f"{entry.pair_id}: {exc}") from exc

    record = {
        "pair_id": entry.pair_id,
        "config": config.echo(),
        "manifest": entry.to_dict(),
        "camera_height": inputs.camera_height,
        "inputs": {name: _sha256(p) for name, p in sorted(entry.paths().items())},
        "outputs": {name: {"file": p.name, "sha256": _sha256(p)} for name, p in sorted(outputs.items())},
        "occupied_cells": int(grid.occupied.sum()),
    }
    run_path = Path(f"{stem}_run.json")
    run_path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    outputs["run_json"] = run_path
    log.info("%s: %d occupied cells", entry.pair_id, record["occupied_cells"])
    return {name: str(p) for name, p in outputs.items()}


def _project_job(args):
    entry, config, out_dir = args
    return run_project(entry, config, out_dir)


def run_project_batch(entries: Sequence[PairManifest], config: RunConfig, out_dir) -> list[dict]:
    """Project every entry; output bytes do not depend on ``config.workers``."""
    if not entries:
        raise StageError("manifest", "no manifest entries")
    validate_manifests(entries)
    jobs = [(e, config, str(out_dir)) for e in entries]
    if config.workers == 1 or len(entries) == 1:
        return [_project_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(_project_job, jobs))


def _panel(grid: BevGrid) -> np.ndarray:
    v = grid.value.astype(np.float64)
    if v.ndim == 2:
        v = np.repeat(v[..., None], 3, axis=2)
    v = np.where(grid.occupied[..., None], v, 0.0)
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)


COMPARE_PANELS = ("st", "gp", "none", "sgr")


def compare_panels(inputs: PairInputs, config: RunConfig, offset=(0.0, 0.0)) -> dict[str, BevGrid]:
    """ST, GP, naive BEV and SGR rasters of the panorama's colour payload.

    The baselines only draw on pixels with valid depth, so all four panels
    cover the same observed part of the panorama.
    """
    rgb = inputs.panorama
    if rgb.ndim == 2:
        # label panoramas are coloured through the synthetic palette
        rgb = PALETTE[rgb % len(PALETTE)]
    spec = config.grid_spec
    valid = inputs.depth.valid
    grids = {
        "st": ground_plane_project(rgb, inputs.camera_height, spec, BaselineMode.ST_IMAGE, valid),
        "gp": ground_plane_project(rgb, inputs.camera_height, spec, BaselineMode.GP_FEATURE, valid),
        "none": project_depth(inputs.depth, rgb, inputs.footprint, config, mode="none"),
        "sgr": project_depth(inputs.depth, rgb, inputs.footprint, config, mode="sgr"),
    }
    return {k: translate(g, *offset) for k, g in grids.items()}


def run_compare(entry: PairManifest, config: RunConfig, out_dir) -> str:
    """Write ``<pair_id>_compare.png``: four panels side by side (ST, GP, NONE, SGR)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = load_pair(entry, config)
    try:
        grids = compare_panels(inputs, config, (entry.offset_east, entry.offset_north))
    except (ValueError, TypeError) as exc:
        raise StageError("compare", f"{entry.pair_id}: {exc}") from exc
    image = np.concatenate([_panel(grids[k]) for k in COMPARE_PANELS], axis=1)
    path = out_dir / f"{entry.pair_id}_compare.png"
    io.save_image(path, image)
    return str(path)


def run_eval(pred_dir, gt_dir, class_names: Sequence[str], ignore_label: Optional[int] = None) -> dict:
    """Accumulate one confusion matrix over same-named PNG label files."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds = {p.name for p in pred_dir.glob("*.png")}
    gts = {p.name for p in gt_dir.glob("*.png")}
    if not preds and not gts:
        raise StageError("eval", f"no PNG files in {pred_dir} or {gt_dir}")
    unmatched = sorted(preds ^ gts)
    if unmatched:
        raise StageError("eval", "unmatched files: " + ", ".join(unmatched))
    cm = ConfusionMatrix.zeros(len(class_names))
    for name in sorted(gts):
        try:
            cm = accumulate(cm, io.load_labels(gt_dir / name), io.load_labels(pred_dir / name), ignore_label)
        except ValueError as exc:
            raise StageError("eval", f"{name}: {exc}") from exc
    text, table = per_class_table(cm, class_names)
    _, mean = miou(cm)
    try:
        acc = accuracy(cm)
    except ValueError as exc:
        raise StageError("eval", str(exc)) from exc
    return {
        "num_images": len(gts),
        "miou": round(100 * mean, 2),
        "acc": round(100 * acc, 2),
        "per_class": table,
        "table": text,
        "confusion": cm.counts.tolist(),
    }


def write_synthetic(scene: SyntheticScene, out_dir, pair_id: str = "synthetic") -> PairManifest:
    """Render a scene to disk as a ready-to-project pair.

    Writes the label panorama (``_pano.png``), the 16-bit depth, footprint,
    satellite labels, the eroded interior mask (``_interior.png``) and a
    one-line ``manifest.jsonl`` with paths relative to ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    render = render_synthetic(scene)
    names = {
        "panorama_path": f"{pair_id}_pano.png",
        "depth_path": f"{pair_id}_depth.png",
        "footprint_path": f"{pair_id}_footprint.png",
        "satellite_label_path": f"{pair_id}_satlabels.png",
    }
    io.save_image(out_dir / names["panorama_path"], render.labels)
    io.save_image(out_dir / f"{pair_id}_rgb.png", render.rgb)
    io.save_depth_png(out_dir / names["depth_path"], render.depth)
    io.save_image(out_dir / names["footprint_path"], render.footprint.mask * 255)
    io.save_image(out_dir / names["satellite_label_path"], render.satellite_labels)
    io.save_image(out_dir / f"{pair_id}_interior.png", render.interior * 255)
    entry = PairManifest(
        pair_id=pair_id,
        gsd=scene.gsd,
        camera_height=scene.camera_height,
        tile_size=scene.tile_size,
        **names,
    )
    io.write_manifests(out_dir / "manifest.jsonl", [entry])
    return PairManifest.from_dict(entry.to_dict(), base_dir=out_dir)
