"""Extract scored oriented boxes from a heatmap.

Pipeline: threshold the raster at tau, label connected components
(8-connectivity, per channel), fit a minimum-area rectangle to each
component's pixel centers, then multiply the sides by the footprint
scale factor for tau.

Because pixel centers undershoot the true tau-boundary, each measured side
is dilated by half a sample pitch on both ends (one pitch per dimension)
before scaling. With ``upsample > 1`` every component is re-measured on a
bilinearly upsampled window of the heatmap, shrinking the pitch and with it
the quantization error of both sides and angle; coordinates are reported in
heatmap-pixel units regardless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .encoder import Heatmap, upsample_raster
from .geometry import Detection, OrientedBox, canonicalize, min_area_rect
from .kernels import scale_factor

_STRUCT8 = np.ones((3, 3), dtype=int)


@dataclass
class BinaryMap:
    """Boolean raster, shape (C, H, W); bit = heatmap value >= tau."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if self.bits.ndim != 3:
            raise ValueError(f"binary map must be (C, H, W), got shape {self.bits.shape}")


@dataclass
class ComponentLabelMap:
    """Integer labels per channel (0 = background), labels dense 1..count.

    Two foreground pixels share a label iff 8-connected; labels are numbered
    in first-encounter row-major order within each channel.
    """

    labels: np.ndarray
    counts: list[int]


def binarize(h: Heatmap, tau: float) -> BinaryMap:
    """Per-pixel comparison ``value >= tau``, channel-independent."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    return BinaryMap(h.data >= np.float32(tau))


def _label_first_encounter(bits2d: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(bits2d, structure=_STRUCT8)
    if count == 0:
        return labels.astype(np.int32), 0
    # renumber so labels follow first row-major appearance
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    raw = flat[fg]
    uniq, first_pos = np.unique(raw, return_index=True)
    order = np.argsort(fg[first_pos], kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[uniq[order]] = np.arange(1, count + 1, dtype=np.int32)
    return remap[labels], count


def label_components(b: BinaryMap) -> ComponentLabelMap:
    """8-connectivity component labels for every channel."""
    labels = np.zeros(b.bits.shape, dtype=np.int32)
    counts = []
    for c in range(b.bits.shape[0]):
        labels[c], count = _label_first_encounter(b.bits[c])
        counts.append(count)
    return ComponentLabelMap(labels=labels, counts=counts)


def _hull_candidates(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # per-row extreme pixels carry the convex hull of a lattice set
    order = np.lexsort((xs, ys))
    xs, ys = xs[order], ys[order]
    rows, first = np.unique(ys, return_index=True)
    last = np.r_[first[1:], len(ys)] - 1
    return np.concatenate([xs[first], xs[last]]), np.concatenate([rows, rows])


def _refined_points(
    hm2d: np.ndarray, xs: np.ndarray, ys: np.ndarray, tau: float, upsample: int
) -> np.ndarray | None:
    """Component pixel centers re-measured on an upsampled window, or None."""
    pad = 2
    height, width = hm2d.shape
    x0 = max(0, int(xs.min()) - pad)
    x1 = min(width - 1, int(xs.max()) + pad)
    y0 = max(0, int(ys.min()) - pad)
    y1 = min(height - 1, int(ys.max()) + pad)
    window = hm2d[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    fine = upsample_raster(window, upsample)
    fine_labels, count = _label_first_encounter(fine >= tau)
    if count == 0:
        return None
    # fine samples straddle each coarse center; either neighbor identifies it
    fy = np.minimum((ys - y0) * upsample + upsample // 2, fine.shape[0] - 1)
    fx = np.minimum((xs - x0) * upsample + upsample // 2, fine.shape[1] - 1)
    keep = np.unique(fine_labels[fy, fx])
    keep = keep[keep > 0]
    if keep.size == 0:
        return None
    mask = np.isin(fine_labels, keep)
    fys, fxs = np.nonzero(mask)
    cx, cy = _hull_candidates(fxs, fys)
    return np.stack(
        [(cx + 0.5) / upsample + x0, (cy + 0.5) / upsample + y0], axis=1
    )


def _fit_component(
    hm2d: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    channel: int,
    tau: float,
    gamma: float,
    upsample: int,
) -> Detection:
    score = float(hm2d[ys, xs].max())
    points = None
    if upsample > 1:
        points = _refined_points(hm2d, xs, ys, tau, upsample)
        pitch = 1.0 / upsample
    if points is None:
        cx, cy = _hull_candidates(xs, ys)
        points = np.stack([cx + 0.5, cy + 0.5], axis=1)
        pitch = 1.0
    rect = min_area_rect(points)
    s = scale_factor(tau, gamma)
    box = canonicalize(
        OrientedBox(rect.cx, rect.cy, (rect.w + pitch) * s, (rect.h + pitch) * s, rect.theta)
    )
    return Detection(box=box, score=min(score, 1.0), class_id=channel)


def component_to_box(
    labels: ComponentLabelMap,
    h: Heatmap,
    component_id: int,
    channel: int,
    tau: float,
    gamma: float,
    upsample: int = 1,
) -> Detection:
    """Detection for one labeled component.

    Score is the component's maximum heatmap value; the box is the scaled
    minimum-area rectangle in canonical form.
    """
    ys, xs = np.nonzero(labels.labels[channel] == component_id)
    if len(xs) == 0:
        raise ValueError(f"component {component_id} is empty on channel {channel}")
    return _fit_component(h.data[channel], xs, ys, channel, tau, gamma, upsample)


def decode(
    h: Heatmap,
    tau: float = 0.3,
    gamma: float = 7.0,
    min_area_px: int = 3,
    upsample: int = 1,
) -> list[Detection]:
    """All detections of a heatmap, sorted by descending score.

    Components smaller than ``min_area_px`` pixels are discarded. Ties in
    score break deterministically by (channel, component label).
    """
    if upsample < 1:
        raise ValueError(f"upsample must be >= 1, got {upsample}")
    bits = binarize(h, tau)
    detections: list[Detection] = []
    for channel in range(h.channels):
        labels, count = _label_first_encounter(bits.bits[channel])
        if count == 0:
            continue
        ys_all, xs_all = np.nonzero(labels)
        labs = labels[ys_all, xs_all]
        order = np.argsort(labs, kind="stable")
        ys_all, xs_all, labs = ys_all[order], xs_all[order], labs[order]
        bounds = np.searchsorted(labs, np.arange(1, count + 2))
        hm2d = h.data[channel]
        for comp in range(1, count + 1):
            lo, hi = bounds[comp - 1], bounds[comp]
            if hi - lo < min_area_px:
                continue
            detections.append(
                _fit_component(hm2d, xs_all[lo:hi], ys_all[lo:hi], channel, tau, gamma, upsample)
            )
    detections.sort(key=lambda d: (-d.score, d.class_id))
    return detections
