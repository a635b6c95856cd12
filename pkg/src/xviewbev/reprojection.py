"""Radial reprojection of a panorama point cloud.

Points farther than ``d0`` from the camera are pushed outward along their
ground-plane bearing by ``ln(1 + d - d0) * alpha``.  In satellite-guided
mode ``alpha`` comes from the footprint block the point starts in, and
moved points that leave the footprint are dropped.  The depth-guided
variant uses one fixed ``alpha`` and never clips.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .guidance import AlphaGrid, FootprintMask, alpha_lookup, contains
from .panorama import PointCloud

DEFAULT_D0 = 10.0


class Mode(str, enum.Enum):
    SGR = "sgr"
    DGR = "dgr"
    NONE = "none"


class MissingGuidanceError(ValueError):
    pass


@dataclass(frozen=True)
class ReprojectionConfig:
    d0: float = DEFAULT_D0
    mode: Mode = Mode.SGR
    fixed_alpha: float = 15.0
    center_east: float = 0.0
    center_north: float = 0.0
    clip_to_footprint: Optional[bool] = None  # None: on for SGR only

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.d0 < 0:
            raise ValueError(f"d0 must be nonnegative, got {self.d0}")
        if self.fixed_alpha < 0:
            raise ValueError(f"fixed_alpha must be nonnegative, got {self.fixed_alpha}")

    @property
    def clips(self) -> bool:
        if self.clip_to_footprint is None:
            return self.mode is Mode.SGR
        return bool(self.clip_to_footprint)


def offset_magnitude(d, d0: float, alpha):
    """Outward shift distance in meters; zero for points nearer than ``d0``.

    Raises:
        ValueError: for nonpositive depth.
    """
    d = np.asarray(d, dtype=np.float64)
    if np.any(~(d > 0)):
        raise ValueError("depth must be positive")
    alpha = np.asarray(alpha, dtype=np.float64)
    # log1p keeps precision near d == d0; the masked branch never sees a negative argument
    excess = np.maximum(d - d0, 0.0)
    delta = np.where(d < d0, 0.0, np.log1p(excess) * alpha)
    return float(delta) if delta.ndim == 0 else delta


def offset_direction(east, north, center_east: float = 0.0, center_north: float = 0.0):
    """Unit ground-plane vector pointing from the center to each point.

    A point exactly at the center gets the zero vector.
    """
    de = np.asarray(east, dtype=np.float64) - center_east
    dn = np.asarray(north, dtype=np.float64) - center_north
    norm = np.hypot(de, dn)
    safe = np.where(norm > 0, norm, 1.0)
    ue = np.where(norm > 0, de / safe, 0.0)
    un = np.where(norm > 0, dn / safe, 0.0)
    if ue.ndim == 0:
        return float(ue), float(un)
    return ue, un


def reproject(
    cloud: PointCloud,
    config: ReprojectionConfig,
    alpha_grid: Optional[AlphaGrid] = None,
    footprint: Optional[FootprintMask] = None,
) -> PointCloud:
    """Shift points outward by the depth- and footprint-driven offset.

    The vertical coordinate is untouched and surviving points keep their
    input order.
    """
    mode = config.mode
    if mode is Mode.NONE or len(cloud) == 0:
        return cloud
    if mode is Mode.SGR:
        if alpha_grid is None or footprint is None:
            raise MissingGuidanceError("SGR mode needs both an alpha grid and a footprint mask")
        alpha = alpha_lookup(alpha_grid, cloud.east, cloud.north)
    else:
        alpha = np.full(len(cloud), config.fixed_alpha)

    delta = offset_magnitude(cloud.depth, config.d0, alpha)
    ue, un = offset_direction(cloud.east, cloud.north, config.center_east, config.center_north)
    shifted = delta > 0
    new_east = np.where(shifted, delta * ue + cloud.east, cloud.east)
    new_north = np.where(shifted, delta * un + cloud.north, cloud.north)

    moved = PointCloud(
        new_east, cloud.y, np.where(shifted, -new_north, cloud.z),
        cloud.src_row, cloud.src_col, cloud.depth,
        cloud.payload, cloud.source_shape,
    )
    if not config.clips:
        return moved
    if footprint is None:
        raise MissingGuidanceError("footprint clipping requested without a footprint mask")
    keep = ~shifted | contains(footprint, new_east, new_north)
    if keep.all():
        return moved
    return moved.select(keep)
