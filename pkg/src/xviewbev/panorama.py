"""Equirectangular panorama geometry.

Conventions used throughout the package:

  - Row ``i`` of an H x W panorama has polar angle ``theta = i * pi / H``
    (0 at the zenith, pi/2 on the horizon).
  - Column ``j`` has azimuth ``phi = pi - 2 * pi * j / W``.  Column 0 faces
    compass north and bearings increase clockwise, so column ``j`` looks
    along bearing ``2 * pi * j / W``.
  - Camera-frame points are ``(X, Y, Z)`` with ``Y`` up.  On the ground
    plane, ``east = X`` and ``north = -Z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

NORTH_AT_COLUMN_ZERO = "north_at_col0"


class DimensionError(ValueError):
    """Raised when raster dimensions are zero or inconsistent."""


@dataclass(frozen=True)
class AngleGrid:
    height: int
    width: int
    theta: np.ndarray  # (H, W) polar angle, 0 = zenith
    phi: np.ndarray  # (H, W) azimuth


@dataclass
class PanoramaDepth:
    """Metric depth of an equirectangular panorama.

    Holes are stored as NaN; every finite positive entry is a valid depth.
    """

    depth: np.ndarray
    heading_convention: str = NORTH_AT_COLUMN_ZERO

    def __post_init__(self) -> None:
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.ndim != 2 or 0 in self.depth.shape:
            raise DimensionError(f"depth must be a nonempty 2-D array, got shape {self.depth.shape}")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid(self) -> np.ndarray:
        d = self.depth
        return np.isfinite(d) & (d > 0)


@dataclass
class PointCloud:
    """Structure-of-arrays point cloud in the camera frame.

    ``depth`` is the source panorama depth of each point; it is carried
    along unchanged by reprojection so the offset can be computed from it.
    ``payload`` is either None or an array whose first axis has length N.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    src_row: np.ndarray
    src_col: np.ndarray
    depth: np.ndarray
    payload: Optional[np.ndarray] = None
    source_shape: tuple[int, int] = field(default=(0, 0))

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @classmethod
    def empty(cls, source_shape: tuple[int, int] = (0, 0)) -> "PointCloud":
        f = np.zeros(0, dtype=np.float64)
        i = np.zeros(0, dtype=np.int64)
        return cls(f, f.copy(), f.copy(), i, i.copy(), f.copy(), None, source_shape)

    @property
    def east(self) -> np.ndarray:
        return self.x

    @property
    def north(self) -> np.ndarray:
        return -self.z

    def select(self, keep: np.ndarray) -> "PointCloud":
        """Return the sub-cloud given by a boolean mask or index array, order preserved."""
        payload = None if self.payload is None else self.payload[keep]
        return PointCloud(
            self.x[keep], self.y[keep], self.z[keep],
            self.src_row[keep], self.src_col[keep], self.depth[keep],
            payload, self.source_shape,
        )

    def with_payload(self, raster: np.ndarray) -> "PointCloud":
        """Attach per-pixel payloads by gathering ``raster[src_row, src_col]``."""
        raster = np.asarray(raster)
        if raster.shape[:2] != tuple(self.source_shape):
            raise DimensionError(
                f"payload raster {raster.shape[:2]} does not match panorama {self.source_shape}"
            )
        return PointCloud(
            self.x, self.y, self.z, self.src_row, self.src_col, self.depth,
            raster[self.src_row, self.src_col], self.source_shape,
        )


def compute_angle_grid(height: int, width: int) -> AngleGrid:
    """Closed-form polar and azimuth angles of every panorama pixel."""
    if height < 1 or width < 1:
        raise DimensionError(f"panorama dimensions must be positive, got {height}x{width}")
    rows = np.arange(height, dtype=np.float64) * np.pi / height
    cols = -2.0 * np.pi * np.arange(width, dtype=np.float64) / width + np.pi
    theta = np.broadcast_to(rows[:, None], (height, width))
    phi = np.broadcast_to(cols[None, :], (height, width))
    return AngleGrid(height, width, theta, phi)


def depth_to_points(depth: PanoramaDepth, angles: AngleGrid) -> PointCloud:
    """Lift every valid depth pixel to a camera-frame 3-D point.

    Points are emitted in row-major order of their source pixel; holes are
    skipped.

    Raises:
        DimensionError: if the depth map and the angle grid disagree in size.
    """
    if (depth.height, depth.width) != (angles.height, angles.width):
        raise DimensionError(
            f"depth is {depth.height}x{depth.width} but angles are {angles.height}x{angles.width}"
        )
    rows, cols = np.nonzero(depth.valid)
    d = depth.depth[rows, cols]
    theta = angles.theta[rows, cols]
    phi = angles.phi[rows, cols]
    sin_t = np.sin(theta)
    x = d * sin_t * np.sin(phi)
    y = d * np.cos(theta)
    z = d * sin_t * np.cos(phi)
    return PointCloud(
        x, y, z,
        rows.astype(np.int64), cols.astype(np.int64), d,
        None, (depth.height, depth.width),
    )


def camera_to_ground_plane(x, y, z):
    """Map camera-frame coordinates to ``(east, north)`` on the ground plane.

    The vertical coordinate ``y`` does not take part; it is accepted so a
    whole point can be passed positionally.
    """
    return np.asarray(x, dtype=np.float64), -np.asarray(z, dtype=np.float64)


def ground_plane_to_camera(east, north):
    """Inverse of :func:`camera_to_ground_plane` for the horizontal axes: ``(X, Z)``."""
    return np.asarray(east, dtype=np.float64), -np.asarray(north, dtype=np.float64)


def column_bearing(col, width: int):
    """Compass bearing (radians clockwise from north) seen by a panorama column."""
    return 2.0 * np.pi * np.asarray(col, dtype=np.float64) / width
