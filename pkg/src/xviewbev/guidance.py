"""Footprint-derived guidance: 3x3 block ratios and offset coefficients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .panorama import DimensionError

DEFAULT_SLOPE = 20.0
RATIO_THRESHOLD = 0.1


def round_half_away(x):
    """Round to the nearest integer, ties away from zero (``np.round`` ties to even)."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


@dataclass
class FootprintMask:
    """Binary building mask of a north-up satellite tile.

    ``center`` is the camera position in continuous pixel coordinates
    ``(col, row)`` where pixel ``(r, c)`` has its center at ``(c, r)``.
    When omitted it defaults to the geometric tile center.
    """

    mask: np.ndarray
    gsd: float
    center: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        m = np.asarray(self.mask)
        if m.ndim != 2 or 0 in m.shape:
            raise DimensionError(f"footprint mask must be a nonempty 2-D raster, got {m.shape}")
        self.mask = (m != 0).astype(np.uint8)
        if not self.gsd > 0:
            raise ValueError(f"gsd must be positive, got {self.gsd}")
        h, w = self.mask.shape
        if self.center is None:
            self.center = ((w - 1) / 2.0, (h - 1) / 2.0)
        cx, cy = self.center
        if not (-0.5 <= cx < w - 0.5 and -0.5 <= cy < h - 0.5):
            raise ValueError(f"camera center {self.center} lies outside the {h}x{w} tile")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    def to_pixel(self, east, north):
        """Continuous ``(col, row)`` pixel coordinates of ground-plane points."""
        cx, cy = self.center
        east = np.asarray(east, dtype=np.float64)
        north = np.asarray(north, dtype=np.float64)
        return cx + east / self.gsd, cy - north / self.gsd

    def snap(self, east, north):
        """Nearest pixel ``(row, col)`` indices, possibly out of bounds."""
        col, row = self.to_pixel(east, north)
        return round_half_away(row), round_half_away(col)


@dataclass(frozen=True)
class AlphaGrid:
    rho: np.ndarray  # (3, 3)
    alpha: np.ndarray  # (3, 3)
    t: float
    row_edges: tuple[int, int, int, int]
    col_edges: tuple[int, int, int, int]
    gsd: float
    center: tuple[float, float]
    shape: tuple[int, int]

    @property
    def block_bounds(self) -> list[tuple[int, int, int, int]]:
        """The nine ``(row0, row1, col0, col1)`` half-open rectangles, row-major."""
        r, c = self.row_edges, self.col_edges
        return [(r[i], r[i + 1], c[j], c[j + 1]) for i in range(3) for j in range(3)]

    def to_dict(self) -> dict:
        return {
            "rho": self.rho.tolist(),
            "alpha": self.alpha.tolist(),
            "t": self.t,
            "row_edges": list(self.row_edges),
            "col_edges": list(self.col_edges),
            "gsd": self.gsd,
            "center": list(self.center),
            "shape": list(self.shape),
        }


def block_edges(n: int) -> tuple[int, int, int, int]:
    """Split ``n`` pixels into three runs; the first ``n % 3`` runs get one extra pixel."""
    base, extra = divmod(n, 3)
    sizes = [base + (1 if k < extra else 0) for k in range(3)]
    return (0, sizes[0], sizes[0] + sizes[1], n)


def block_ratio_grid(mask: FootprintMask):
    """Fraction of building pixels in each cell of the 3x3 tile partition.

    Returns:
        ``(rho, row_edges, col_edges)`` where ``rho`` is a (3, 3) float64
        array. Empty blocks (only possible below 3 pixels per side) get 0.
    """
    m = mask.mask
    if m.size == 0:
        raise DimensionError("footprint mask is empty")
    row_edges = block_edges(m.shape[0])
    col_edges = block_edges(m.shape[1])
    rho = np.zeros((3, 3), dtype=np.float64)
    for i in range(3):
        for j in range(3):
            block = m[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]]
            if block.size:
                rho[i, j] = int(block.sum()) / block.size
    return rho, row_edges, col_edges


def alpha_from_ratio(rho, t: float = DEFAULT_SLOPE):
    """Offset coefficient: 0 up to a 10% building ratio, then ``5 + t * rho``.

    Works elementwise on arrays; scalars come back as Python floats.
    """
    if t < 0:
        raise ValueError(f"slope t must be nonnegative, got {t}")
    r = np.asarray(rho, dtype=np.float64)
    if np.any(~((r >= 0.0) & (r <= 1.0))):
        raise ValueError(f"ratio must lie in [0, 1], got {rho}")
    alpha = np.where(r > RATIO_THRESHOLD, 5.0 + t * r, 0.0)
    return float(alpha) if alpha.ndim == 0 else alpha


def build_alpha_grid(mask: FootprintMask, t: float = DEFAULT_SLOPE) -> AlphaGrid:
    rho, row_edges, col_edges = block_ratio_grid(mask)
    return AlphaGrid(
        rho=rho,
        alpha=alpha_from_ratio(rho, t),
        t=float(t),
        row_edges=row_edges,
        col_edges=col_edges,
        gsd=float(mask.gsd),
        center=tuple(float(v) for v in mask.center),
        shape=mask.mask.shape,
    )


def alpha_lookup(grid: AlphaGrid, east, north):
    """Coefficient of the block containing each ground point; off-tile points clamp to the edge."""
    cx, cy = grid.center
    row = round_half_away(cy - np.asarray(north, dtype=np.float64) / grid.gsd)
    col = round_half_away(cx + np.asarray(east, dtype=np.float64) / grid.gsd)
    row = np.clip(row, 0, grid.shape[0] - 1)
    col = np.clip(col, 0, grid.shape[1] - 1)
    # searchsorted on the interior edges gives the block index; empty blocks are skipped
    bi = np.searchsorted(np.asarray(grid.row_edges[1:3]), row, side="right")
    bj = np.searchsorted(np.asarray(grid.col_edges[1:3]), col, side="right")
    out = grid.alpha[bi, bj]
    return float(out) if np.ndim(out) == 0 else out


def contains(mask: FootprintMask, east, north):
    """True where a ground point snaps to an in-bounds building pixel."""
    row, col = mask.snap(east, north)
    inside = (row >= 0) & (row < mask.height) & (col >= 0) & (col < mask.width)
    hit = np.zeros(np.shape(inside), dtype=bool)
    hit[inside] = mask.mask[row[inside], col[inside]] == 1
    return bool(hit) if hit.ndim == 0 else hit
