"""Rotated-rectangle and convex-quad primitives.

Angle convention: ``theta`` is measured counter-clockwise from the +x axis
to the side of length ``w``. The canonical range is [0, pi/2); together with
swapping (w, h) this removes the four-fold ambiguity of the (w, h, theta)
encoding of a rectangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

MIN_SIDE = 1e-6  # short-side clamp for degenerate rectangles, in pixels


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle as center, size, and angle (radians)."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h", "theta"):
            v = float(getattr(self, name))  # plain float even from numpy scalars
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise ValueError(f"non-finite field {name!r}: {v}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Detection:
    """A scored, classified oriented box."""

    box: OrientedBox
    score: float
    class_id: int

    def __post_init__(self):
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "class_id", int(self.class_id))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


def to_corners(box: OrientedBox) -> np.ndarray:
    """Corners of ``box`` as a (4, 2) array, counter-clockwise by shoelace sign."""
    a, b = box.w / 2.0, box.h / 2.0
    c, s = math.cos(box.theta), math.sin(box.theta)
    ux, uy = a * c, a * s
    vx, vy = -b * s, b * c
    return np.array(
        [
            [box.cx + ux + vx, box.cy + uy + vy],
            [box.cx - ux + vx, box.cy - uy + vy],
            [box.cx - ux - vx, box.cy - uy - vy],
            [box.cx + ux - vx, box.cy + uy - vy],
        ]
    )


def canonicalize(box: OrientedBox) -> OrientedBox:
    """Equivalent box with theta in [0, pi/2), swapping (w, h) as needed."""
    t = box.theta % math.pi
    if t >= math.pi:  # guard against rounding of tiny negative inputs
        t -= math.pi
    if t >= math.pi / 2:
        return replace(box, w=box.h, h=box.w, theta=t - math.pi / 2)
    return replace(box, theta=t)


def polygon_area(points) -> float:
    """Absolute shoelace area of a simple polygon given as (x, y) pairs."""
    n = len(points)
    acc = 0.0
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2.0


def _as_ccw_tuples(quad) -> list[tuple[float, float]]:
    pts = [(float(p[0]), float(p[1])) for p in quad]
    acc = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    if acc < 0:
        pts.reverse()
    return pts


def _clip_convex(subject, clipper):
    # Sutherland-Hodgman; clipper must be CCW
    out = subject
    n = len(clipper)
    for i in range(n):
        if not out:
            return []
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        m = len(inp)
        for j in range(m):
            px, py = inp[j]
            qx, qy = inp[(j + 1) % m]
            d1 = ex * (py - ay) - ey * (px - ax)
            d2 = ex * (qy - ay) - ey * (qx - ax)
            if d1 >= 0:
                out.append((px, py))
            if (d1 >= 0) != (d2 >= 0):
                t = d1 / (d1 - d2)
                out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def polygon_iou(a, b) -> float:
    """Intersection over union of two convex quads (any vertex order).

    Exact convex clipping plus shoelace areas; degenerate (zero-area) quads
    give 0. Symmetric by construction: the operand pair is ordered
    canonically before clipping.
    """
    pa = _as_ccw_tuples(a)
    pb = _as_ccw_tuples(b)
    if pb < pa:  # canonical operand order makes iou(a, b) == iou(b, a) exact
        pa, pb = pb, pa
    area_a = polygon_area(pa)
    area_b = polygon_area(pb)
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    inter = _clip_convex(pa, pb)
    inter_area = polygon_area(inter) if len(inter) >= 3 else 0.0
    union = area_a + area_b - inter_area
    if union <= 0.0:
        return 0.0
    return min(max(inter_area / union, 0.0), 1.0)


def box_iou(a: OrientedBox, b: OrientedBox) -> float:
    """polygon_iou over the corner quads of two oriented boxes."""
    return polygon_iou(to_corners(a), to_corners(b))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull (monotone chain) of (N, 2) points, CCW, no collinear vertices."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    lower: list[tuple[float, float]] = []
    for x, y in pts:
        while len(lower) >= 2:
            ox, oy = lower[-2]
            ax, ay = lower[-1]
            if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) <= 0:
                lower.pop()
            else:
                break
        lower.append((x, y))
    upper: list[tuple[float, float]] = []
    for x, y in pts[::-1]:
        while len(upper) >= 2:
            ox, oy = upper[-2]
            ax, ay = upper[-1]
            if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) <= 0:
                upper.pop()
            else:
                break
        upper.append((x, y))
    return np.array(lower[:-1] + upper[:-1])


def min_area_rect(points) -> OrientedBox:
    """Smallest-area oriented rectangle enclosing the points, canonical form.

    Convex hull plus rotating calipers (the optimum has a side flush with a
    hull edge, so enumerating hull-edge orientations is exact). Collinear or
    single-point inputs degenerate; the short side is clamped to MIN_SIDE.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("no points")
    pts = pts.reshape(-1, 2)
    hull = convex_hull(pts)
    if len(hull) == 1:
        (x, y), = hull
        return OrientedBox(x, y, MIN_SIDE, MIN_SIDE, 0.0)
    if len(hull) == 2:
        (x0, y0), (x1, y1) = hull
        length = math.hypot(x1 - x0, y1 - y0)
        ang = math.atan2(y1 - y0, x1 - x0)
        return canonicalize(
            OrientedBox((x0 + x1) / 2, (y0 + y1) / 2, max(length, MIN_SIDE), MIN_SIDE, ang)
        )
    edges = np.diff(np.vstack([hull, hull[:1]]), axis=0)
    angles = np.arctan2(edges[:, 1], edges[:, 0])
    ca, sa = np.cos(angles), np.sin(angles)
    proj_u = hull[:, 0][None, :] * ca[:, None] + hull[:, 1][None, :] * sa[:, None]
    proj_v = -hull[:, 0][None, :] * sa[:, None] + hull[:, 1][None, :] * ca[:, None]
    u_min, u_max = proj_u.min(axis=1), proj_u.max(axis=1)
    v_min, v_max = proj_v.min(axis=1), proj_v.max(axis=1)
    areas = (u_max - u_min) * (v_max - v_min)
    i = int(np.argmin(areas))
    cu = (u_min[i] + u_max[i]) / 2
    cv = (v_min[i] + v_max[i]) / 2
    cx = cu * ca[i] - cv * sa[i]
    cy = cu * sa[i] + cv * ca[i]
    w = max(u_max[i] - u_min[i], MIN_SIDE)
    h = max(v_max[i] - v_min[i], MIN_SIDE)
    return canonicalize(OrientedBox(cx, cy, w, h, float(angles[i])))


def _by_score(dets: list[Detection]) -> list[Detection]:
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    return [dets[i] for i in order]


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy same-class suppression at the given polygon-IoU threshold."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    kept: list[Detection] = []
    kept_corners: list[np.ndarray] = []
    for det in _by_score(dets):
        corners = to_corners(det.box)
        suppressed = False
        for other, oc in zip(kept, kept_corners):
            if other.class_id == det.class_id and polygon_iou(corners, oc) >= iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(det)
            kept_corners.append(corners)
    return kept


def soft_nms(
    dets: list[Detection], sigma: float = 0.5, score_floor: float = 0.001
) -> list[Detection]:
    """Gaussian score decay instead of hard suppression, per class.

    Repeatedly selects the highest-scoring remaining box, then multiplies
    every remaining same-class score by exp(-iou^2 / sigma), dropping boxes
    that fall below ``score_floor``. Output is score-descending with ties
    broken by insertion order.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    pool = [
        (i, det, det.score, to_corners(det.box))
        for i, det in enumerate(dets)
        if det.score >= score_floor
    ]
    out: list[Detection] = []
    while pool:
        best = min(range(len(pool)), key=lambda k: (-pool[k][2], pool[k][0]))
        idx, det, score, corners = pool.pop(best)
        out.append(replace(det, score=score))
        survivors = []
        for item in pool:
            oi, odet, oscore, ocorners = item
            if odet.class_id == det.class_id:
                decay = math.exp(-polygon_iou(corners, ocorners) ** 2 / sigma)
                oscore = oscore * decay
            if oscore >= score_floor:
                survivors.append((oi, odet, oscore, ocorners))
        pool = survivors
    return out
