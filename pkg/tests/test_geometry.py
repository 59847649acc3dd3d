import math

import numpy as np
import pytest

from heatboxes.geometry import (
    Detection,
    OrientedBox,
    box_iou,
    canonicalize,
    convex_hull,
    min_area_rect,
    nms,
    polygon_area,
    polygon_iou,
    soft_nms,
    to_corners,
)


def random_box(rng, span=20.0, side=(0.5, 10.0)):
    return OrientedBox(
        cx=rng.uniform(-span, span),
        cy=rng.uniform(-span, span),
        w=rng.uniform(*side),
        h=rng.uniform(*side),
        theta=rng.uniform(0.0, math.pi),
    )


def corner_set(box):
    return {(round(x, 9), round(y, 9)) for x, y in to_corners(box)}


class TestOrientedBox:
    def test_rejects_nonpositive_sides(self):
        with pytest.raises(ValueError):
            OrientedBox(0, 0, 0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            OrientedBox(0, 0, 1.0, -2.0, 0.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            OrientedBox(float("nan"), 0, 1, 1, 0)


class TestToCorners:
    def test_axis_aligned_unit_square(self):
        got = corner_set(OrientedBox(0, 0, 2, 2, 0.0))
        assert got == {(1, 1), (-1, 1), (-1, -1), (1, -1)}

    def test_quarter_turn_square_same_corner_set(self):
        a = corner_set(OrientedBox(0, 0, 2, 2, 0.0))
        b = corner_set(OrientedBox(0, 0, 2, 2, math.pi / 2))
        assert a == b

    def test_matches_rotation_matrix_oracle(self):
        # independent oracle: rotate the axis-aligned corners with an explicit 2x2 matrix
        box = OrientedBox(10, 20, 4, 2, math.pi / 6)
        c, s = math.cos(box.theta), math.sin(box.theta)
        rot = np.array([[c, -s], [s, c]])
        base = np.array([[2, 1], [-2, 1], [-2, -1], [2, -1]], dtype=float)
        expected = base @ rot.T + [10, 20]
        got = to_corners(box)
        assert np.allclose(sorted(map(tuple, got)), sorted(map(tuple, expected)), atol=1e-12)

    def test_corners_ccw_and_centroid(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            box = random_box(rng)
            quad = to_corners(box)
            signed = 0.0
            for i in range(4):
                x0, y0 = quad[i]
                x1, y1 = quad[(i + 1) % 4]
                signed += x0 * y1 - x1 * y0
            assert signed > 0
            assert np.allclose(quad.mean(axis=0), [box.cx, box.cy], atol=1e-9)


class TestCanonicalize:
    def test_quarter_turn_swaps_sides(self):
        got = canonicalize(OrientedBox(0, 0, 4, 2, math.pi / 2 + 0.1))
        assert (got.w, got.h) == (2, 4)
        assert got.theta == pytest.approx(0.1)

    def test_pi_periodicity(self):
        got = canonicalize(OrientedBox(0, 0, 4, 2, math.pi + 0.2))
        assert (got.w, got.h) == (4, 2)
        assert got.theta == pytest.approx(0.2)

    def test_angle_already_in_range_is_unchanged(self):
        # 1.3 rad < pi/2, so the box is already canonical
        got = canonicalize(OrientedBox(0, 0, 3, 3, 1.3))
        assert (got.w, got.h, got.theta) == (3, 3, 1.3)

    def test_range_reduction_above_half_pi(self):
        got = canonicalize(OrientedBox(0, 0, 3, 3, 1.9))
        assert got.theta == pytest.approx(1.9 - math.pi / 2)

    def test_corner_set_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            box = OrientedBox(0, 0, rng.uniform(1, 5), rng.uniform(1, 5), rng.uniform(-10, 10))
            canon = canonicalize(box)
            assert 0 <= canon.theta < math.pi / 2
            assert corner_set(box) == corner_set(canon)
            # canonical form is a fixed point
            again = canonicalize(canon)
            assert (again.w, again.h, again.theta) == (canon.w, canon.h, canon.theta)

    def test_all_four_encodings_collapse(self):
        box = OrientedBox(1, 2, 5, 3, 0.4)
        variants = [
            OrientedBox(1, 2, 3, 5, 0.4 + math.pi / 2),
            OrientedBox(1, 2, 5, 3, 0.4 + math.pi),
            OrientedBox(1, 2, 3, 5, 0.4 + 3 * math.pi / 2),
        ]
        canon = canonicalize(box)
        for v in variants:
            got = canonicalize(v)
            assert got.w == pytest.approx(canon.w, abs=1e-12)
            assert got.h == pytest.approx(canon.h, abs=1e-12)
            assert got.theta == pytest.approx(canon.theta, abs=1e-12)


def mc_iou(a: OrientedBox, b: OrientedBox, rng, samples=100_000) -> float:
    """Monte-Carlo IoU oracle over the union's bounding box."""
    ca, cb = to_corners(a), to_corners(b)
    allpts = np.vstack([ca, cb])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pts = rng.uniform(lo, hi, size=(samples, 2))

    def inside(quad, p):
        res = np.ones(len(p), dtype=bool)
        for i in range(4):
            e = quad[(i + 1) % 4] - quad[i]
            d = p - quad[i]
            res &= e[0] * d[:, 1] - e[1] * d[:, 0] >= 0
        return res

    in_a = inside(ca, pts)
    in_b = inside(cb, pts)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


class TestPolygonIou:
    def test_identical_boxes(self):
        quad = to_corners(OrientedBox(3, 4, 5, 2, 0.7))
        assert polygon_iou(quad, quad) == 1.0

    def test_disjoint_boxes(self):
        a = to_corners(OrientedBox(0, 0, 2, 2, 0.0))
        b = to_corners(OrientedBox(10, 10, 2, 2, 0.3))
        assert polygon_iou(a, b) == 0.0

    def test_half_shifted_unit_squares(self):
        # intersection 0.5, union 1.5 -> 1/3 by hand shoelace arithmetic
        a = to_corners(OrientedBox(0, 0, 1, 1, 0.0))
        b = to_corners(OrientedBox(0.5, 0, 1, 1, 0.0))
        assert polygon_iou(a, b) == pytest.approx(1 / 3, abs=1e-12)

    def test_degenerate_quad_gives_zero(self):
        line = [(0, 0), (1, 0), (2, 0), (3, 0)]
        square = to_corners(OrientedBox(0, 0, 2, 2, 0.0))
        assert polygon_iou(line, square) == 0.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b = to_corners(random_box(rng)), to_corners(random_box(rng))
            assert polygon_iou(a, b) == polygon_iou(b, a)

    def test_bounds_and_self(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            v = box_iou(a, b)
            assert 0.0 <= v <= 1.0
            assert box_iou(a, a) == 1.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = to_corners(random_box(rng)), to_corners(random_box(rng))
            shift = rng.uniform(-50, 50, size=2)
            assert polygon_iou(a, b) == pytest.approx(polygon_iou(a + shift, b + shift), abs=1e-9)

    def test_vertex_order_irrelevant(self):
        a = to_corners(OrientedBox(0, 0, 3, 2, 0.5))
        b = to_corners(OrientedBox(1, 0.5, 2, 2, 1.1))
        assert polygon_iou(a[::-1], b) == pytest.approx(polygon_iou(a, b), abs=1e-12)

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            a = random_box(rng, span=3.0, side=(1.0, 6.0))
            b = random_box(rng, span=3.0, side=(1.0, 6.0))
            exact = box_iou(a, b)
            approx = mc_iou(a, b, rng)
            assert abs(exact - approx) <= 0.01


class TestMinAreaRect:
    def test_empty_input_raises(self):
        with pytest.raises(ValueError, match="no points"):
            min_area_rect([])

    def test_axis_aligned_fixed_point(self):
        pts = [(0, 0), (4, 0), (4, 2), (0, 2)]
        rect = min_area_rect(pts)
        assert rect.cx == pytest.approx(2.0)
        assert rect.cy == pytest.approx(1.0)
        assert rect.w == pytest.approx(4.0)
        assert rect.h == pytest.approx(2.0)
        assert rect.theta == pytest.approx(0.0)

    def test_collinear_points_degenerate(self):
        rect = min_area_rect([(0, 0), (1, 1), (2, 2), (3, 3)])
        assert rect.h == pytest.approx(1e-6)
        assert rect.w == pytest.approx(math.hypot(3, 3))

    def test_single_point(self):
        rect = min_area_rect([(5, 7)])
        assert (rect.cx, rect.cy) == (5, 7)
        assert rect.w == rect.h == pytest.approx(1e-6)

    def test_contains_all_points(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            pts = rng.uniform(-10, 10, size=(40, 2))
            rect = min_area_rect(pts)
            quad = to_corners(rect)
            for p in pts:
                d = p - quad.mean(axis=0)
                # point inside iff projections onto both axes fit the half-extents
                u = np.array([math.cos(rect.theta), math.sin(rect.theta)])
                v = np.array([-math.sin(rect.theta), math.cos(rect.theta)])
                pu = abs(np.dot(p - [rect.cx, rect.cy], u))
                pv = abs(np.dot(p - [rect.cx, rect.cy], v))
                assert pu <= rect.w / 2 + 1e-9 and pv <= rect.h / 2 + 1e-9

    def test_area_vs_angle_sweep_oracle(self):
        # oracle: axis-aligned bbox area minimized over rotations in 0.05 deg steps
        rng = np.random.default_rng(8)
        sweep = np.radians(np.arange(0.0, 90.0, 0.05))
        cos, sin = np.cos(sweep), np.sin(sweep)
        for _ in range(100):
            pts = rng.uniform(-8, 8, size=(50, 2))
            rect = min_area_rect(pts)
            xs = pts[:, 0][None, :] * cos[:, None] + pts[:, 1][None, :] * sin[:, None]
            ys = -pts[:, 0][None, :] * sin[:, None] + pts[:, 1][None, :] * cos[:, None]
            areas = (xs.max(axis=1) - xs.min(axis=1)) * (ys.max(axis=1) - ys.min(axis=1))
            oracle = areas.min()
            assert rect.w * rect.h <= oracle * 1.005

    def test_box_corners_round_trip(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            box = random_box(rng, side=(1.0, 9.0))
            rect = min_area_rect(to_corners(box))
            canon = canonicalize(box)
            assert rect.cx == pytest.approx(canon.cx, abs=1e-6)
            assert rect.cy == pytest.approx(canon.cy, abs=1e-6)
            assert rect.w == pytest.approx(canon.w, abs=1e-6)
            assert rect.h == pytest.approx(canon.h, abs=1e-6)
            assert rect.theta == pytest.approx(canon.theta, abs=1e-6)


class TestConvexHull:
    def test_hull_of_square_with_interior(self):
        pts = [(0, 0), (2, 0), (2, 2), (0, 2), (1, 1), (0.5, 0.5)]
        hull = convex_hull(np.array(pts, dtype=float))
        assert len(hull) == 4
        assert polygon_area(hull) == pytest.approx(4.0)


def det(cx, cy, w, h, theta, score, class_id=0):
    return Detection(OrientedBox(cx, cy, w, h, theta), score, class_id)


def greedy_nms_oracle(dets, thr):
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept = []
    for i in order:
        ok = True
        for j in kept:
            if dets[j].class_id == dets[i].class_id and box_iou(dets[j].box, dets[i].box) >= thr:
                ok = False
                break
        if ok:
            kept.append(i)
    return [dets[i] for i in kept]


class TestNms:
    def test_duplicate_suppressed(self):
        a = det(0, 0, 2, 2, 0.1, 0.9)
        b = det(0, 0, 2, 2, 0.1, 0.8)
        kept = nms([b, a], 0.5)
        assert kept == [a]

    def test_disjoint_all_kept(self):
        dets = [det(0, 0, 2, 2, 0, 0.9), det(10, 0, 2, 2, 0, 0.5), det(0, 10, 2, 2, 0, 0.7)]
        assert len(nms(dets, 0.5)) == 3

    def test_different_classes_not_suppressed(self):
        a = det(0, 0, 2, 2, 0, 0.9, class_id=0)
        b = det(0, 0, 2, 2, 0, 0.8, class_id=1)
        assert len(nms([a, b], 0.5)) == 2

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            nms([], 0.0)
        with pytest.raises(ValueError):
            nms([], 1.0)

    def test_chain_matches_oracle(self):
        # three boxes in a row with pairwise IoUs straddling the threshold
        chain = [
            det(0.0, 0, 4, 2, 0, 0.9),
            det(1.5, 0, 4, 2, 0, 0.8),
            det(3.0, 0, 4, 2, 0, 0.7),
        ]
        for thr in (0.2, 0.4, 0.6):
            assert nms(chain, thr) == greedy_nms_oracle(chain, thr)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            dets = [
                det(
                    rng.uniform(0, 10),
                    rng.uniform(0, 10),
                    rng.uniform(2, 6),
                    rng.uniform(2, 6),
                    rng.uniform(0, math.pi / 2),
                    round(rng.uniform(0.05, 1.0), 3),
                    int(rng.integers(0, 2)),
                )
                for _ in range(12)
            ]
            thr = rng.uniform(0.2, 0.7)
            got = nms(dets, thr)
            assert got == greedy_nms_oracle(dets, thr)
            # no two kept same-class boxes overlap at or above the threshold
            for i, a in enumerate(got):
                for b in got[i + 1 :]:
                    if a.class_id == b.class_id:
                        assert box_iou(a.box, b.box) < thr


class TestSoftNms:
    def test_disjoint_scores_unchanged(self):
        dets = [det(0, 0, 2, 2, 0, 0.9), det(10, 0, 2, 2, 0, 0.5)]
        out = soft_nms(dets)
        assert [d.score for d in out] == [0.9, 0.5]

    def test_identical_boxes_decay(self):
        dets = [det(0, 0, 2, 2, 0, 0.9), det(0, 0, 2, 2, 0, 0.8)]
        out = soft_nms(dets, sigma=0.5)
        assert out[0].score == pytest.approx(0.9)
        assert out[1].score == pytest.approx(0.8 * math.exp(-1.0 / 0.5))

    def test_single_box_unchanged(self):
        dets = [det(1, 2, 3, 4, 0.5, 0.42)]
        assert soft_nms(dets) == dets

    def test_score_floor_drops(self):
        dets = [det(0, 0, 2, 2, 0, 0.9), det(0, 0, 2, 2, 0, 0.8)]
        out = soft_nms(dets, sigma=0.5, score_floor=0.5)
        assert len(out) == 1

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            soft_nms([], sigma=0.0)

    def test_output_order_deterministic(self):
        dets = [det(0, 0, 2, 2, 0, 0.5), det(10, 0, 2, 2, 0, 0.5)]
        out = soft_nms(dets)
        assert out == dets  # equal scores keep insertion order
