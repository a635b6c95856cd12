"""Deterministic feature-fusion arithmetic on (C, H, W) arrays.

Feature maps are plain float arrays of shape (C, H, W); flow fields are
(2, H, W) arrays of ``(drow, dcol)`` pixel displacements.  No parameters
are learned here, every weight is an argument.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .panorama import DimensionError


def _as_map(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 3:
        raise DimensionError(f"{name} must have shape (C, H, W), got {a.shape}")
    return a


def warp(fmap, flow) -> np.ndarray:
    """Bilinearly resample ``fmap`` at ``(r + drow, x + dcol)`` for every pixel.

    Neighbours that fall outside the map contribute zero.
    """
    fmap = _as_map(fmap, "feature map")
    flow = np.asarray(flow, dtype=np.float64)
    c, h, w = fmap.shape
    if flow.shape != (2, h, w):
        raise DimensionError(f"flow must have shape (2, {h}, {w}), got {flow.shape}")
    rr, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    qr = rr + flow[0]
    qx = xx + flow[1]
    r0 = np.floor(qr)
    x0 = np.floor(qx)
    fr = qr - r0
    fx = qx - x0
    r0 = r0.astype(np.int64)
    x0 = x0.astype(np.int64)

    out = np.zeros_like(fmap)
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            ri = r0 + dr
            xi = x0 + dx
            ok = (ri >= 0) & (ri < h) & (xi >= 0) & (xi < w)
            weight = np.where(ok, wr * wx, 0.0)
            vals = fmap[:, np.clip(ri, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += vals * weight
    return out


def concat(a, b) -> np.ndarray:
    """Stack ``b``'s channels after ``a``'s."""
    a = _as_map(a, "first map")
    b = _as_map(b, "second map")
    if a.shape[1:] != b.shape[1:]:
        raise DimensionError(f"spatial sizes differ: {a.shape[1:]} vs {b.shape[1:]}")
    return np.concatenate([a, b], axis=0)


def global_average_pool(fmap) -> np.ndarray:
    fmap = _as_map(fmap, "feature map")
    return fmap.mean(axis=(1, 2))


def pointwise_linear(fmap, weights, bias) -> np.ndarray:
    """Per-pixel ``weights @ v + bias`` (a 1x1 convolution)."""
    fmap = _as_map(fmap, "feature map")
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != fmap.shape[0]:
        raise DimensionError(f"weights {weights.shape} do not accept {fmap.shape[0]} input channels")
    if bias.shape != (weights.shape[0],):
        raise DimensionError(f"bias {bias.shape} does not match {weights.shape[0]} output channels")
    return np.einsum("oc,chw->ohw", weights, fmap) + bias[:, None, None]


def fuse_aligned(
    f_bev,
    f_sat,
    flow,
    proj_weight,
    proj_bias,
    gate_weight: Optional[np.ndarray] = None,
    gate_bias: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Warp the BEV map, concatenate with the satellite map, gate and project.

    The gate is ``gate_weight @ pool(cat) + gate_bias`` broadcast over every
    pixel of the concatenation.  Without gate weights the gate is skipped.
    """
    cat = concat(warp(f_bev, flow), f_sat)
    if gate_weight is not None:
        c = cat.shape[0]
        if gate_bias is None:
            gate_bias = np.zeros(np.asarray(gate_weight).shape[0])
        pooled = global_average_pool(cat).reshape(c, 1, 1)
        gate = pointwise_linear(pooled, gate_weight, gate_bias)
        if gate.shape[0] != c:
            raise DimensionError(f"gate yields {gate.shape[0]} channels, concatenation has {c}")
        cat = cat * gate
    return pointwise_linear(cat, proj_weight, proj_bias)
