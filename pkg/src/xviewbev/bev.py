"""Top-down rasters: point splatting, grid translation and ground-plane baselines.

The grid is camera-centred and north-up.  With ``res = extent / size`` a
ground point ``(east, north)`` lands in

    row = floor(size / 2 - north / res)
    col = floor(size / 2 + east / res)

so for even sizes the camera sits on the shared corner of the four middle
cells and pixel ``(size // 2, size // 2)`` holds the origin corner.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .guidance import round_half_away
from .panorama import PanoramaDepth, PointCloud, compute_angle_grid, depth_to_points

DEFAULT_SIZE = 256
DEFAULT_EXTENT = 70.0
DEFAULT_CAMERA_HEIGHT = 2.5


class Reduction(str, enum.Enum):
    FIRST = "first"
    MEAN = "mean"
    MAX_HEIGHT = "max_height"


class BaselineMode(str, enum.Enum):
    GP_FEATURE = "gp"
    ST_IMAGE = "st"


@dataclass(frozen=True)
class BevGridSpec:
    size: int = DEFAULT_SIZE
    extent: float = DEFAULT_EXTENT
    reduction: Reduction = Reduction.MAX_HEIGHT

    def __post_init__(self) -> None:
        object.__setattr__(self, "reduction", Reduction(self.reduction))
        if self.size < 1:
            raise ValueError(f"grid size must be at least 1, got {self.size}")
        if not self.extent > 0:
            raise ValueError(f"grid extent must be positive, got {self.extent}")

    @property
    def resolution(self) -> float:
        return self.extent / self.size

    def cell_of(self, east, north):
        """Integer ``(row, col)`` of ground points, unclipped."""
        res = self.resolution
        half = self.size / 2.0
        row = np.floor(half - np.asarray(north, dtype=np.float64) / res).astype(np.int64)
        col = np.floor(half + np.asarray(east, dtype=np.float64) / res).astype(np.int64)
        return row, col

    def cell_centers(self):
        """Ground ``(east, north)`` of every cell center, each of shape (size, size)."""
        res = self.resolution
        half = self.size / 2.0
        idx = np.arange(self.size, dtype=np.float64) + 0.5
        east = (idx - half) * res
        north = (half - idx) * res
        return np.broadcast_to(east[None, :], (self.size,) * 2), np.broadcast_to(north[:, None], (self.size,) * 2)


@dataclass
class BevGrid:
    """Rasterized cells.  Empty cells have ``src_row == -1``.

    ``value`` is None when the splatted cloud carried no payload; otherwise
    it has shape ``(size, size) + payload_shape`` with zeros in empty cells.
    ``count`` is the number of points that fell into each cell before the
    reduction.
    """

    spec: BevGridSpec
    src_row: np.ndarray
    src_col: np.ndarray
    height: np.ndarray
    count: np.ndarray
    value: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, spec: BevGridSpec, payload_shape=None, dtype=np.float64) -> "BevGrid":
        s = spec.size
        value = None if payload_shape is None else np.zeros((s, s) + tuple(payload_shape), dtype=dtype)
        return cls(
            spec,
            np.full((s, s), -1, dtype=np.int64),
            np.full((s, s), -1, dtype=np.int64),
            np.full((s, s), np.nan),
            np.zeros((s, s), dtype=np.int64),
            value,
        )

    @property
    def occupied(self) -> np.ndarray:
        return self.src_row >= 0

    def equals(self, other: "BevGrid") -> bool:
        """Bitwise equality of every cell array (NaN compares equal to NaN)."""
        if self.spec != other.spec:
            return False
        if (self.value is None) != (other.value is None):
            return False
        pairs = [(self.src_row, other.src_row), (self.src_col, other.src_col),
                 (self.height, other.height), (self.count, other.count)]
        if self.value is not None:
            pairs.append((self.value, other.value))
        return all(a.shape == b.shape and a.tobytes() == b.tobytes() for a, b in pairs)


def rasterize(cloud: PointCloud, spec: BevGridSpec) -> BevGrid:
    """Splat a point cloud onto the grid.

    Conflicts inside one cell are settled by ``spec.reduction``:

      - FIRST keeps the lexicographically smallest source pixel.
      - MAX_HEIGHT keeps the highest point, ties by source pixel.
      - MEAN averages payload and height; the smallest source index is kept
        as the cell's representative.

    The result does not depend on the order of the input points.

    Raises:
        TypeError: MEAN with a non-numeric payload.
    """
    payload = cloud.payload
    if spec.reduction is Reduction.MEAN and payload is not None:
        if not (np.issubdtype(payload.dtype, np.number) or payload.dtype == np.bool_):
            raise TypeError(f"cannot average payload of dtype {payload.dtype}")
    payload_shape = None if payload is None else payload.shape[1:]
    if spec.reduction is Reduction.MEAN and payload is not None:
        dtype = np.float64
    else:
        dtype = np.float64 if payload is None else payload.dtype
    grid = BevGrid.empty(spec, payload_shape, dtype)
    if len(cloud) == 0:
        return grid

    s = spec.size
    row, col = spec.cell_of(cloud.east, cloud.north)
    inside = (row >= 0) & (row < s) & (col >= 0) & (col < s)
    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        return grid
    cell = row[idx] * s + col[idx]
    sr = cloud.src_row[idx]
    sc = cloud.src_col[idx]
    hy = cloud.y[idx]

    counts = np.bincount(cell, minlength=s * s)
    grid.count[...] = counts.reshape(s, s)

    if spec.reduction is Reduction.MAX_HEIGHT:
        order = np.lexsort((sc, sr, -hy, cell))
    else:
        order = np.lexsort((sc, sr, cell))
    cell_sorted = cell[order]
    first = np.ones(cell_sorted.shape, dtype=bool)
    first[1:] = cell_sorted[1:] != cell_sorted[:-1]
    winners = idx[order[first]]
    cells = cell_sorted[first]
    r, c = np.divmod(cells, s)
    grid.src_row[r, c] = cloud.src_row[winners]
    grid.src_col[r, c] = cloud.src_col[winners]

    if spec.reduction is Reduction.MEAN:
        n = counts[cells].astype(np.float64)
        grid.height[r, c] = np.bincount(cell, weights=hy, minlength=s * s)[cells] / n
        if payload is not None:
            flat = payload[idx].reshape(idx.size, -1).astype(np.float64)
            sums = np.stack(
                [np.bincount(cell, weights=flat[:, k], minlength=s * s)[cells] for k in range(flat.shape[1])],
                axis=1,
            )
            grid.value[r, c] = (sums / n[:, None]).reshape((cells.size,) + payload_shape)
    else:
        grid.height[r, c] = cloud.y[winners]
        if payload is not None:
            grid.value[r, c] = payload[winners]
    return grid


def _shift(a: np.ndarray, dr: int, dc: int, fill) -> np.ndarray:
    out = np.full_like(a, fill)
    s0, s1 = a.shape[0], a.shape[1]
    if abs(dr) >= s0 or abs(dc) >= s1:
        return out
    src_r = slice(max(0, -dr), s0 - max(0, dr))
    dst_r = slice(max(0, dr), s0 - max(0, -dr))
    src_c = slice(max(0, -dc), s1 - max(0, dc))
    dst_c = slice(max(0, dc), s1 - max(0, -dc))
    out[dst_r, dst_c] = a[src_r, src_c]
    return out


def pixel_offset(spec: BevGridSpec, offset_east: float, offset_north: float) -> tuple[int, int]:
    """Whole-cell ``(drow, dcol)`` shift for a metric offset, ties away from zero."""
    res = spec.resolution
    return int(round_half_away(-offset_north / res)), int(round_half_away(offset_east / res))


def translate(grid: BevGrid, offset_east: float, offset_north: float) -> BevGrid:
    """Move every cell by the pixel-rounded metric offset; vacated cells become empty."""
    dr, dc = pixel_offset(grid.spec, offset_east, offset_north)
    if dr == 0 and dc == 0:
        return replace(grid, meta=dict(grid.meta))
    value = None if grid.value is None else _shift(grid.value, dr, dc, 0)
    return BevGrid(
        grid.spec,
        _shift(grid.src_row, dr, dc, -1),
        _shift(grid.src_col, dr, dc, -1),
        _shift(grid.height, dr, dc, np.nan),
        _shift(grid.count, dr, dc, 0),
        value,
        dict(grid.meta),
    )


def flat_ground_depth(height: int, width: int, camera_height: float) -> PanoramaDepth:
    """Depth of a panorama that sees only an infinite ground plane.

    Rows at or above the horizon never hit the ground and are holes.
    """
    if not camera_height > 0:
        raise ValueError(f"camera height must be positive, got {camera_height}")
    angles = compute_angle_grid(height, width)
    depth = np.full((height, width), np.nan)
    below = 2 * np.arange(height) > height
    depth[below] = camera_height / -np.cos(angles.theta[below])
    return PanoramaDepth(depth)


def ground_plane_project(
    pano: np.ndarray,
    camera_height: float,
    spec: BevGridSpec,
    mode: BaselineMode = BaselineMode.GP_FEATURE,
    valid: Optional[np.ndarray] = None,
) -> BevGrid:
    """Project a panorama onto a flat ground plane without using depth.

    GP_FEATURE splats below-horizon pixels forward (FIRST reduction).
    ST_IMAGE samples the panorama bilinearly at each cell's ground point,
    wrapping around in azimuth and never reading rows at or above the
    horizon.

    Args:
        valid: optional (H, W) mask of usable source pixels. GP skips the
            others; ST leaves a cell empty when its nearest source pixel
            is unusable.

    Raises:
        ValueError: nonpositive ``camera_height`` or a mis-sized ``valid``.
    """
    if not camera_height > 0:
        raise ValueError(f"camera height must be positive, got {camera_height}")
    pano = np.asarray(pano)
    h, w = pano.shape[:2]
    mode = BaselineMode(mode)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != (h, w):
            raise ValueError(f"valid mask {valid.shape} does not match panorama {(h, w)}")
    if mode is BaselineMode.GP_FEATURE:
        depth = flat_ground_depth(h, w, camera_height)
        if valid is not None:
            depth = PanoramaDepth(np.where(valid, depth.depth, np.nan), depth.heading_convention)
        cloud = depth_to_points(depth, compute_angle_grid(h, w)).with_payload(pano)
        out = rasterize(cloud, replace(spec, reduction=Reduction.FIRST))
        out.meta["baseline"] = mode.value
        return out
    grid = _spherical_transform(pano, camera_height, spec)
    if valid is not None:
        unused = grid.occupied & ~valid[np.maximum(grid.src_row, 0), np.maximum(grid.src_col, 0)]
        grid.src_row[unused] = grid.src_col[unused] = -1
        grid.count[unused] = 0
        grid.height[unused] = np.nan
        grid.value[unused] = 0
    return grid


def _spherical_transform(pano: np.ndarray, camera_height: float, spec: BevGridSpec) -> BevGrid:
    h, w = pano.shape[:2]
    payload_shape = pano.shape[2:]
    grid = BevGrid.empty(spec, payload_shape, np.float64)
    grid.meta["baseline"] = BaselineMode.ST_IMAGE.value
    row_min = h // 2 + 1  # first row strictly below the horizon
    if row_min > h - 1:
        return grid

    east, north = spec.cell_centers()
    ground_range = np.hypot(east, north)
    theta = np.pi / 2 + np.arctan2(camera_height, ground_range)
    bearing = np.mod(np.arctan2(east, north), 2 * np.pi)
    fi = np.clip(theta * h / np.pi, row_min, h - 1)
    fj = bearing * w / (2 * np.pi)

    i0 = np.clip(np.floor(fi).astype(np.int64), row_min, max(row_min, h - 2))
    i1 = np.minimum(i0 + 1, h - 1)
    wi = fi - i0
    j0f = np.floor(fj)
    wj = fj - j0f
    j0 = np.mod(j0f.astype(np.int64), w)
    j1 = np.mod(j0 + 1, w)

    src = pano.astype(np.float64)
    expand = (...,) + (None,) * len(payload_shape)
    wi, wj = wi[expand], wj[expand]
    top = src[i0, j0] * (1 - wj) + src[i0, j1] * wj
    bot = src[i1, j0] * (1 - wj) + src[i1, j1] * wj
    grid.value[...] = top * (1 - wi) + bot * wi

    grid.src_row[...] = np.clip(round_half_away(fi), row_min, h - 1)
    grid.src_col[...] = np.mod(round_half_away(fj), w)
    grid.height[...] = -camera_height
    grid.count[...] = 1
    return grid
