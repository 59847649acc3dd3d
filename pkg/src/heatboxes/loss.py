"""Hard false-positive pixel sampling and the size-weighted MSE objective.

These are pure verification-side functions over (prediction, ground truth,
weight mask) triples; no gradients are involved. Positive pixels are those
with nonzero ground truth; false positives are pixels predicted nonzero
where the ground truth is exactly zero. False positives are ranked by
squared error and sampled top-k at ``ratio`` times the positive count, so
the loss sees foreground plus only the hardest background mistakes. True
negatives are excluded: with zero ground truth and zero prediction their
residual contributes nothing anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import Heatmap, SizeWeightMask

# fallback sample size for scenes with no positive pixels
EMPTY_SCENE_FP_SAMPLES = 256


@dataclass
class PixelSample:
    """FPEM sampling result; pixel indices are (x, y, channel) tuples."""

    positives: frozenset[tuple[int, int, int]]
    sampled_false_positives: list[tuple[int, int, int]]
    ratio: int
    false_positive_count: int

    def __post_init__(self):
        if self.positives & set(self.sampled_false_positives):
            raise ValueError("positives and sampled false positives overlap")


def _check_shapes(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def fpem_sample(pred: Heatmap, gt: Heatmap, ratio: int = 3) -> PixelSample:
    """Positives plus the hardest false positives at 1:ratio.

    False positives are ordered by squared error descending with a
    deterministic tie-break on (row-major pixel index, channel); the top
    min(ratio * |positives|, all) are kept. When there are no positives the
    top EMPTY_SCENE_FP_SAMPLES false positives are kept instead.
    """
    _check_shapes(pred.data, gt.data)
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    pos_mask = gt.data > 0
    fp_mask = (gt.data == 0) & (pred.data > 0)

    cc, yy, xx = np.nonzero(pos_mask)
    positives = frozenset(zip(xx.tolist(), yy.tolist(), cc.tolist()))

    cc, yy, xx = np.nonzero(fp_mask)
    fp_total = len(cc)
    k = ratio * len(positives) if positives else EMPTY_SCENE_FP_SAMPLES
    k = min(k, fp_total)
    sampled: list[tuple[int, int, int]] = []
    if k > 0:
        err = (
            pred.data[cc, yy, xx].astype(np.float64) - gt.data[cc, yy, xx].astype(np.float64)
        ) ** 2
        pixel_index = yy.astype(np.int64) * pred.width + xx.astype(np.int64)
        order = np.lexsort((cc, pixel_index, -err))[:k]
        sampled = list(zip(xx[order].tolist(), yy[order].tolist(), cc[order].tolist()))
    return PixelSample(
        positives=positives,
        sampled_false_positives=sampled,
        ratio=ratio,
        false_positive_count=fp_total,
    )


def masked_mse(
    pred: Heatmap, gt: Heatmap, mask: SizeWeightMask, sample: PixelSample
) -> float:
    """(1/S) * sum over sampled pixels of M(p) * (H(p) - GT(p))^2.

    S is the mask's total object size; for empty scenes (S == 0) the sum is
    normalized by the sampled pixel count instead, and an entirely empty
    sample yields 0.
    """
    _check_shapes(pred.data, gt.data)
    _check_shapes(pred.data, mask.data)
    pixels = list(sample.positives) + list(sample.sampled_false_positives)
    if not pixels:
        return 0.0
    idx = np.array(pixels, dtype=np.int64)
    xx, yy, cc = idx[:, 0], idx[:, 1], idx[:, 2]
    residual = pred.data[cc, yy, xx].astype(np.float64) - gt.data[cc, yy, xx].astype(np.float64)
    weighted = mask.data[cc, yy, xx].astype(np.float64) * residual**2
    denom = mask.total_size if mask.object_count > 0 else float(len(pixels))
    return float(weighted.sum() / denom)
