"""Render oriented ground-truth boxes into per-category heatmaps and weights.

Rasterization maps each pixel center analytically into the box's normalized
frame (inverse rotation, then division by the half-extents) and evaluates
the kernel there, rather than resampling a fixed square kernel raster. A
pixel belongs to a box iff its center lands in the open support
|u| < 1, |v| < 1. Overlapping kernels combine by element-wise maximum.

Pixel centers sit at integer coordinates + 0.5 in heatmap space; boxes are
given in image coordinates and divided by the scene's downsample rate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import OrientedBox
from .kernels import KernelSpec, eval_kernel_grid

log = logging.getLogger(__name__)


@dataclass
class Heatmap:
    """C-channel float32 raster with values in [0, 1], shape (C, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"heatmap data must be (C, H, W), got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ValueError(f"heatmap dims must be >= 1, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("heatmap contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueError("heatmap values must lie in [0, 1]")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @classmethod
    def zeros(cls, width: int, height: int, channels: int) -> "Heatmap":
        return cls(np.zeros((channels, height, width), dtype=np.float32))


@dataclass
class SizeWeightMask:
    """Per-pixel loss weights, same raster shape as the heatmap.

    Background pixels carry weight exactly 1; every pixel of object i
    carries total_size / (S_i * object_count) where S_i is the object's
    geometric area in heatmap px^2 (clamped below at 1). Pixels covered by
    several objects take the largest weight.
    """

    data: np.ndarray
    total_size: float
    object_count: int

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"mask data must be (C, H, W), got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)) or self.data.min() < 0.0:
            raise ValueError("mask weights must be finite and >= 0")


@dataclass
class GroundTruthScene:
    """Annotated image: dimensions, downsample rate, and labeled boxes."""

    image_width: int
    image_height: int
    num_classes: int
    boxes: list[tuple[OrientedBox, int]] = field(default_factory=list)
    downsample: int = 2
    difficult: list[bool] | None = None

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dims must be >= 1")
        if self.downsample < 1:
            raise ValueError(f"downsample must be >= 1, got {self.downsample}")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.difficult is None:
            self.difficult = [False] * len(self.boxes)
        elif len(self.difficult) != len(self.boxes):
            raise ValueError("difficult flags must match the box count")

    @property
    def grid_width(self) -> int:
        return -(-self.image_width // self.downsample)

    @property
    def grid_height(self) -> int:
        return -(-self.image_height // self.downsample)


def _footprint_window(box: OrientedBox, width: int, height: int):
    """Integer pixel window covering the box support, or None if off-raster."""
    a, b = box.w / 2.0, box.h / 2.0
    c, s = math.cos(box.theta), math.sin(box.theta)
    ex = abs(c) * a + abs(s) * b
    ey = abs(s) * a + abs(c) * b
    x0 = max(0, int(math.floor(box.cx - ex)))
    x1 = min(width - 1, int(math.ceil(box.cx + ex)))
    y0 = max(0, int(math.floor(box.cy - ey)))
    y1 = min(height - 1, int(math.ceil(box.cy + ey)))
    if x1 < x0 or y1 < y0:
        return None
    return x0, x1, y0, y1


def _normalized_coords(box: OrientedBox, window):
    x0, x1, y0, y1 = window
    xs = np.arange(x0, x1 + 1, dtype=float) + 0.5
    ys = np.arange(y0, y1 + 1, dtype=float) + 0.5
    dx = xs[None, :] - box.cx
    dy = ys[:, None] - box.cy
    c, s = math.cos(box.theta), math.sin(box.theta)
    u = (dx * c + dy * s) / (box.w / 2.0)
    v = (-dx * s + dy * c) / (box.h / 2.0)
    return u, v


def _grid_box(box: OrientedBox, downsample: int) -> OrientedBox:
    r = float(downsample)
    return OrientedBox(box.cx / r, box.cy / r, box.w / r, box.h / r, box.theta)


def encode(scene: GroundTruthScene, spec: KernelSpec) -> Heatmap:
    """Ground-truth heatmap for the scene: one rendered kernel per box."""
    width, height = scene.grid_width, scene.grid_height
    data = np.zeros((scene.num_classes, height, width), dtype=np.float32)
    dropped = 0
    for box, class_id in scene.boxes:
        if not 0 <= class_id < scene.num_classes:
            raise ValueError(f"channel out of range: class {class_id} with {scene.num_classes} channels")
        gbox = _grid_box(box, scene.downsample)
        window = _footprint_window(gbox, width, height)
        if window is None:
            dropped += 1
            continue
        u, v = _normalized_coords(gbox, window)
        inside = (np.abs(u) < 1.0) & (np.abs(v) < 1.0)
        values = np.where(inside, eval_kernel_grid(u, v, spec), 0.0).astype(np.float32)
        x0, x1, y0, y1 = window
        target = data[class_id, y0 : y1 + 1, x0 : x1 + 1]
        np.maximum(target, values, out=target)
    if dropped:
        log.warning("encode: dropped %d box(es) fully outside the raster", dropped)
    return Heatmap(data)


def make_swm(scene: GroundTruthScene) -> SizeWeightMask:
    """Size-weight mask matching the scene's heatmap raster.

    With S = sum of per-object areas S_i (heatmap px^2, clamped below at 1)
    and N objects, object-i pixels carry S / (S_i * N) and background 1.
    An empty scene yields an all-ones mask.
    """
    width, height = scene.grid_width, scene.grid_height
    n = len(scene.boxes)
    if n == 0:
        return SizeWeightMask(
            np.ones((scene.num_classes, height, width), dtype=np.float32),
            total_size=0.0,
            object_count=0,
        )
    gboxes = []
    sizes = []
    for box, class_id in scene.boxes:
        if not 0 <= class_id < scene.num_classes:
            raise ValueError(f"channel out of range: class {class_id} with {scene.num_classes} channels")
        gbox = _grid_box(box, scene.downsample)
        gboxes.append((gbox, class_id))
        sizes.append(max(gbox.w * gbox.h, 1.0))
    total = float(sum(sizes))
    fg = np.zeros((scene.num_classes, height, width), dtype=np.float32)
    for (gbox, class_id), size in zip(gboxes, sizes):
        weight = np.float32(total / (size * n))
        window = _footprint_window(gbox, width, height)
        if window is None:
            continue
        u, v = _normalized_coords(gbox, window)
        inside = (np.abs(u) < 1.0) & (np.abs(v) < 1.0)
        x0, x1, y0, y1 = window
        target = fg[class_id, y0 : y1 + 1, x0 : x1 + 1]
        np.maximum(target, np.where(inside, weight, np.float32(0.0)), out=target)
    data = np.where(fg > 0.0, fg, np.float32(1.0))
    return SizeWeightMask(data, total_size=total, object_count=n)


def upsample_raster(data: np.ndarray, factor: int) -> np.ndarray:
    """Bilinear upsample of a (H, W) or (C, H, W) float array.

    Half-pixel-center alignment: output center ``(i + 0.5) / factor - 0.5``
    in input coordinates, with edge samples clamped so values never leave
    the input's [min, max] range.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return data.copy()
    squeeze = data.ndim == 2
    arr = data[None] if squeeze else data
    _, h, w = arr.shape
    xs = (np.arange(w * factor, dtype=float) + 0.5) / factor - 0.5
    ys = (np.arange(h * factor, dtype=float) + 0.5) / factor - 0.5
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wy0, wy1 = (1.0 - fy)[:, None], fy[:, None]
    wx0, wx1 = (1.0 - fx)[None, :], fx[None, :]
    out = (
        arr[:, y0][:, :, x0] * (wy0 * wx0)
        + arr[:, y0][:, :, x1] * (wy0 * wx1)
        + arr[:, y1][:, :, x0] * (wy1 * wx0)
        + arr[:, y1][:, :, x1] * (wy1 * wx1)
    )
    return out[0] if squeeze else out


def upsample_bilinear(h: Heatmap, factor: int) -> Heatmap:
    """Heatmap scaled by an integer factor with bilinear interpolation."""
    out = upsample_raster(h.data.astype(np.float64), factor)
    return Heatmap(out.astype(np.float32))
