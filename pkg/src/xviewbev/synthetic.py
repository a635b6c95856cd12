"""Analytic synthetic scenes: flat ground plus axis-aligned box buildings.

Depths are exact nearest-hit distances along each panorama pixel's ray, so
a scene doubles as ground truth for the whole depth -> BEV chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .bev import DEFAULT_CAMERA_HEIGHT, DEFAULT_EXTENT, DEFAULT_SIZE
from .guidance import FootprintMask
from .panorama import PanoramaDepth, compute_angle_grid

SKY_LABEL = 0
GROUND_LABEL = 1
INTERIOR_EROSION = 2

# label -> RGB, used for the colour panorama handed to the comparison panels
PALETTE = np.array(
    [
        [70, 130, 180],   # sky
        [128, 128, 128],  # ground
        [220, 60, 40],
        [60, 180, 75],
        [240, 200, 40],
        [150, 80, 200],
        [40, 200, 220],
        [250, 130, 30],
    ],
    dtype=np.uint8,
)


@dataclass(frozen=True)
class Box:
    east_min: float
    east_max: float
    north_min: float
    north_max: float
    height: float
    label: int = 2

    def __post_init__(self) -> None:
        if not (self.east_min < self.east_max and self.north_min < self.north_max):
            raise ValueError(f"degenerate box footprint {self}")
        if not self.height > 0:
            raise ValueError(f"box height must be positive, got {self.height}")


@dataclass
class SyntheticScene:
    buildings: Sequence[Box] = field(default_factory=list)
    ground_label: int = GROUND_LABEL
    camera_height: float = DEFAULT_CAMERA_HEIGHT
    pano_dims: tuple[int, int] = (512, 1024)
    tile_size: int = DEFAULT_SIZE
    gsd: float = DEFAULT_EXTENT / DEFAULT_SIZE

    def __post_init__(self) -> None:
        if not self.camera_height > 0:
            raise ValueError("camera height must be positive")
        for box in self.buildings:
            if box.east_min <= 0.0 <= box.east_max and box.north_min <= 0.0 <= box.north_max:
                raise ValueError(f"camera stands inside building {box}")

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticScene":
        data = dict(data)
        data["buildings"] = [Box(**b) for b in data.get("buildings", [])]
        if "pano_dims" in data:
            data["pano_dims"] = tuple(data["pano_dims"])
        return cls(**data)


def canonical_box_scene(pano_dims: tuple[int, int] = (512, 1024)) -> SyntheticScene:
    """One 10 x 10 m, 12 m tall building whose near wall is 5 m north of the camera."""
    return SyntheticScene(
        buildings=[Box(-5.0, 5.0, 5.0, 15.0, 12.0, label=2)],
        pano_dims=pano_dims,
    )


@dataclass
class SyntheticRender:
    depth: PanoramaDepth
    footprint: FootprintMask
    interior: np.ndarray  # footprint eroded by INTERIOR_EROSION pixels
    labels: np.ndarray  # per panorama pixel class of the surface hit
    satellite_labels: np.ndarray

    @property
    def rgb(self) -> np.ndarray:
        return PALETTE[np.clip(self.labels, 0, len(PALETTE) - 1)]


def ray_directions(height: int, width: int):
    """Unit ray per pixel as ``(east, north, up)`` arrays."""
    angles = compute_angle_grid(height, width)
    sin_t = np.sin(angles.theta)
    east = sin_t * np.sin(angles.phi)
    up = np.cos(angles.theta)
    north = -(sin_t * np.cos(angles.phi))
    return east, north, up


def _slab(lo: float, hi: float, d: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = lo / d
        t2 = hi / d
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    parallel = d == 0
    inside = lo <= 0.0 <= hi
    near = np.where(parallel, -np.inf if inside else np.inf, near)
    far = np.where(parallel, np.inf if inside else -np.inf, far)
    return near, far


def box_hit_distance(box: Box, camera_height: float, east, north, up) -> np.ndarray:
    """Entry distance of rays from the camera into ``box``; inf where missed."""
    ne, fe = _slab(box.east_min, box.east_max, east)
    nn, fn = _slab(box.north_min, box.north_max, north)
    nu, fu = _slab(-camera_height, box.height - camera_height, up)
    near = np.maximum(np.maximum(ne, nn), nu)
    far = np.minimum(np.minimum(fe, fn), fu)
    hit = (near <= far) & (near > 0)
    return np.where(hit, near, np.inf)


def render_synthetic(scene: SyntheticScene, center: Optional[tuple[float, float]] = None) -> SyntheticRender:
    """Ray-cast the panorama depth and rasterize the tile-aligned footprint."""
    h, w = scene.pano_dims
    east, north, up = ray_directions(h, w)
    theta = compute_angle_grid(h, w).theta

    depth = np.full((h, w), np.inf)
    labels = np.full((h, w), SKY_LABEL, dtype=np.uint8)
    below = 2 * np.arange(h) > h
    depth[below] = scene.camera_height / -np.cos(theta[below])
    labels[below] = scene.ground_label
    for box in scene.buildings:
        t = box_hit_distance(box, scene.camera_height, east, north, up)
        nearer = t < depth
        depth[nearer] = t[nearer]
        labels[nearer] = box.label
    depth[~np.isfinite(depth)] = np.nan

    s = scene.tile_size
    mask = np.zeros((s, s), dtype=np.uint8)
    footprint = FootprintMask(mask, scene.gsd, center)
    cx, cy = footprint.center
    pe = (np.arange(s) - cx) * scene.gsd
    pn = (cy - np.arange(s)) * scene.gsd
    sat = np.full((s, s), scene.ground_label, dtype=np.uint8)
    for box in scene.buildings:
        inside = ((pn[:, None] >= box.north_min) & (pn[:, None] <= box.north_max)
                  & (pe[None, :] >= box.east_min) & (pe[None, :] <= box.east_max))
        mask[inside] = 1
        sat[inside] = box.label
    footprint = FootprintMask(mask, scene.gsd, center)
    interior = ndimage.binary_erosion(
        mask, structure=np.ones((3, 3), dtype=bool), iterations=INTERIOR_EROSION, border_value=0
    ).astype(np.uint8)
    return SyntheticRender(PanoramaDepth(depth), footprint, interior, labels, sat)
