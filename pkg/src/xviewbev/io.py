"""File formats: CVBR raw rasters, PNG rasters and pair manifests.

CVBR layout (all little-endian)::

    b"CVBR" | version: u8 | C: u32 | H: u32 | W: u32 | dtype: u8 | data

``dtype`` is 1 for u8, 2 for f32 and 3 for f64; data is row-major C x H x W.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from PIL import Image

from .panorama import PanoramaDepth

PathLike = Union[str, Path]

CVBR_MAGIC = b"CVBR"
CVBR_VERSION = 1
_CVBR_HEADER = struct.Struct("<4sBIIIB")
_DTYPE_TAGS = {np.dtype(np.uint8): 1, np.dtype("<f4"): 2, np.dtype("<f8"): 3}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}

DEFAULT_DEPTH_SCALE = 1.0 / 256.0


class FormatError(ValueError):
    """A file exists but does not hold what the reader expects."""


def write_cvbr(path: PathLike, array) -> None:
    """Write a 1-, 2- or 3-D u8/f32/f64 array; lower ranks are padded to (C, H, W) on the left."""
    a = np.asarray(array)
    if a.ndim == 0 or a.ndim > 3:
        raise FormatError(f"CVBR holds 1-3 dimensional arrays, got shape {a.shape}")
    a = a.reshape((1,) * (3 - a.ndim) + a.shape)
    dtype = a.dtype.newbyteorder("<") if a.dtype.kind == "f" else a.dtype
    if dtype not in _DTYPE_TAGS:
        raise FormatError(f"unsupported CVBR dtype {a.dtype}")
    header = _CVBR_HEADER.pack(CVBR_MAGIC, CVBR_VERSION, *a.shape, _DTYPE_TAGS[dtype])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(a, dtype=dtype).tobytes())


def read_cvbr(path: PathLike) -> np.ndarray:
    """Read a CVBR file as a (C, H, W) array."""
    blob = Path(path).read_bytes()
    if len(blob) < _CVBR_HEADER.size:
        raise FormatError(f"{path}: truncated CVBR header")
    magic, version, c, h, w, tag = _CVBR_HEADER.unpack_from(blob)
    if magic != CVBR_MAGIC:
        raise FormatError(f"{path}: not a CVBR file")
    if version != CVBR_VERSION:
        raise FormatError(f"{path}: unsupported CVBR version {version}")
    if tag not in _TAG_DTYPES:
        raise FormatError(f"{path}: unknown dtype tag {tag}")
    dtype = _TAG_DTYPES[tag]
    expected = c * h * w * dtype.itemsize
    body = blob[_CVBR_HEADER.size:]
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=dtype).reshape(c, h, w).copy()


def _open_png(path: PathLike) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: unreadable image ({exc})") from exc
    return img


def load_depth_png(path: PathLike, scale: float = DEFAULT_DEPTH_SCALE) -> PanoramaDepth:
    """Read a 16-bit depth PNG; raw value 0 marks a hole."""
    img = _open_png(path)
    if img.mode not in ("I;16", "I;16B", "I;16L"):
        raise FormatError(f"{path}: expected a 16-bit grayscale PNG, got mode {img.mode}")
    raw = np.asarray(img, dtype=np.uint16)
    depth = raw.astype(np.float64) * scale
    depth[raw == 0] = np.nan
    return PanoramaDepth(depth)


def save_depth_png(path: PathLike, depth: PanoramaDepth, scale: float = DEFAULT_DEPTH_SCALE) -> None:
    d = depth.depth
    raw = np.zeros(d.shape, dtype=np.uint16)
    valid = depth.valid
    raw[valid] = np.clip(np.floor(d[valid] / scale + 0.5), 1, 65535).astype(np.uint16)
    Image.fromarray(raw).save(path)


def load_image(path: PathLike) -> np.ndarray:
    """8-bit image as (H, W) for grayscale or (H, W, 3) for color."""
    img = _open_png(path)
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)
    if img.mode == "P":
        return np.asarray(img, dtype=np.uint8)
    if img.mode in ("RGB", "RGBA"):
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
    raise FormatError(f"{path}: expected an 8-bit grayscale or RGB image, got mode {img.mode}")


def load_labels(path: PathLike) -> np.ndarray:
    labels = load_image(path)
    if labels.ndim != 2:
        raise FormatError(f"{path}: label rasters must be single-channel")
    return labels


def load_mask_png(path: PathLike) -> np.ndarray:
    """Binary building mask: any nonzero pixel counts as building."""
    return (load_labels(path) != 0).astype(np.uint8)


def save_image(path: PathLike, array) -> None:
    a = np.asarray(array)
    if a.dtype != np.uint8:
        a = np.clip(np.floor(np.nan_to_num(a.astype(np.float64)) + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(a).save(path)


@dataclass(frozen=True)
class PairManifest:
    """One street panorama bound to one satellite tile.

    ``offset_east``/``offset_north`` give the street camera position relative
    to the tile center, in meters.
    """

    pair_id: str
    panorama_path: str
    depth_path: str
    footprint_path: str
    satellite_label_path: str
    gsd: float
    offset_east: float = 0.0
    offset_north: float = 0.0
    camera_height: float = 2.5
    tile_size: int = 256

    def __post_init__(self) -> None:
        if not self.gsd > 0:
            raise ValueError(f"{self.pair_id}: gsd must be positive")
        if self.tile_size < 1:
            raise ValueError(f"{self.pair_id}: tile_size must be at least 1")
        for name in ("panorama_path", "depth_path", "footprint_path", "satellite_label_path"):
            if not getattr(self, name):
                raise ValueError(f"{self.pair_id}: {name} is empty")

    @classmethod
    def from_dict(cls, data: dict, base_dir: PathLike | None = None) -> "PairManifest":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown manifest fields: {sorted(unknown)}")
        data = dict(data)
        if base_dir is not None:
            for name in ("panorama_path", "depth_path", "footprint_path", "satellite_label_path"):
                if data.get(name) and not Path(data[name]).is_absolute():
                    data[name] = str(Path(base_dir) / data[name])
        return cls(**data)

    def paths(self) -> dict[str, str]:
        return {
            "panorama_path": self.panorama_path,
            "depth_path": self.depth_path,
            "footprint_path": self.footprint_path,
            "satellite_label_path": self.satellite_label_path,
        }

    def to_dict(self) -> dict:
        return asdict(self)


def read_manifests(path: PathLike) -> list[PairManifest]:
    """Parse newline-delimited JSON; relative paths resolve against the manifest's folder."""
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        entries.append(PairManifest.from_dict(data, base_dir=path.parent))
    return entries


def write_manifests(path: PathLike, entries: Iterable[PairManifest]) -> None:
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
