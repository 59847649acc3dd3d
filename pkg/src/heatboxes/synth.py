"""Seeded synthetic scenes for round-trip and benchmark workflows.

All randomness flows through NumPy's PCG64 generator seeded with a single
64-bit value, so scenes are reproducible across runs and platforms. Boxes
are rejection-sampled until every pair stays at or below the requested
polygon-IoU ceiling; candidates always lie fully inside the image.
"""

from __future__ import annotations

import math

import numpy as np

from .encoder import GroundTruthScene
from .geometry import OrientedBox, box_iou


def synth_scene(
    seed: int,
    image_dims: tuple[int, int],
    box_count_range: tuple[int, int],
    size_range: tuple[float, float] = (8.0, 128.0),
    max_pair_iou: float = 0.05,
    num_classes: int = 1,
    downsample: int = 1,
    max_tries_per_box: int = 2000,
) -> GroundTruthScene:
    """Random scene with the requested box count, sizes, and overlap cap.

    Angles are uniform in [0, pi/2); sides uniform in ``size_range``
    (image-pixel units); classes uniform. Raises RuntimeError when the
    rejection budget runs out, which signals asking for fewer or smaller
    boxes.
    """
    width, height = image_dims
    lo, hi = box_count_range
    if lo < 0 or hi < lo:
        raise ValueError(f"bad box_count_range {box_count_range}")
    if size_range[0] <= 0 or size_range[1] < size_range[0]:
        raise ValueError(f"bad size_range {size_range}")
    rng = np.random.default_rng(seed)
    count = int(rng.integers(lo, hi + 1))
    boxes: list[tuple[OrientedBox, int]] = []
    for k in range(count):
        placed = False
        for _ in range(max_tries_per_box):
            w = float(rng.uniform(size_range[0], size_range[1]))
            h = float(rng.uniform(size_range[0], size_range[1]))
            theta = float(rng.uniform(0.0, math.pi / 2))
            ex = (abs(math.cos(theta)) * w + abs(math.sin(theta)) * h) / 2.0
            ey = (abs(math.sin(theta)) * w + abs(math.cos(theta)) * h) / 2.0
            if 2 * ex >= width or 2 * ey >= height:
                continue
            cx = float(rng.uniform(ex, width - ex))
            cy = float(rng.uniform(ey, height - ey))
            cand = OrientedBox(cx, cy, w, h, theta)
            if all(box_iou(cand, b) <= max_pair_iou for b, _ in boxes):
                class_id = int(rng.integers(0, num_classes))
                boxes.append((cand, class_id))
                placed = True
                break
        if not placed:
            raise RuntimeError(
                f"could not place box {k + 1}/{count} within {max_tries_per_box} tries; "
                "try fewer or smaller boxes"
            )
    return GroundTruthScene(
        image_width=width,
        image_height=height,
        num_classes=num_classes,
        boxes=boxes,
        downsample=downsample,
    )
