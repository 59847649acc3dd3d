"""Rotated-box detection metrics: greedy matching, AP, and COCO-style summaries.

Matching is greedy in score order: each detection takes the highest-IoU
still-unmatched same-class ground-truth box at or above the threshold.
Detections that only reach difficult ground truth are ignored (neither TP
nor FP), and difficult boxes never count toward recall denominators.

AP integrates the precision envelope over recall (all-points variant) or
averages the max precision at the eleven recall points {0, 0.1, ..., 1}.
Classes without ground truth are excluded from mean AP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Detection, OrientedBox, box_iou

COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

# object-size buckets on w*h (px^2): small < 32^2 <= medium < 96^2 <= large
SIZE_SMALL_MAX = 32.0**2
SIZE_MEDIUM_MAX = 96.0**2


@dataclass(frozen=True)
class GroundTruth:
    box: OrientedBox
    class_id: int
    difficult: bool = False


@dataclass
class MatchRecord:
    det_index: int
    score: float
    class_id: int
    status: str  # "tp" | "fp" | "ignored"
    gt_index: int | None = None
    iou: float = 0.0


@dataclass
class EvalResult:
    per_class_ap: dict[int, float]
    mean_ap: float
    ap50: float
    ap75: float
    ar: float
    pr_curves: dict[int, list[tuple[float, float]]] = field(default_factory=dict)
    ap_small: float | None = None
    ap_medium: float | None = None
    ap_large: float | None = None


def match(
    dets: list[Detection],
    gts: list[GroundTruth],
    iou_thr: float,
    area_range: tuple[float, float] | None = None,
) -> list[MatchRecord]:
    """Greedy TP/FP labels for one image's detections.

    ``area_range`` (lo <= w*h < hi) restricts evaluation to a size bucket:
    ground truth outside the range is treated as difficult, and unmatched
    detections outside the range are ignored rather than counted as FP.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched = [False] * len(gts)

    def in_range(box: OrientedBox) -> bool:
        return area_range is None or area_range[0] <= box.area < area_range[1]

    records = []
    for i in order:
        det = dets[i]
        best_gt, best_iou = None, 0.0
        best_ignored, best_ignored_iou = None, 0.0
        for j, gt in enumerate(gts):
            if gt.class_id != det.class_id:
                continue
            iou = box_iou(det.box, gt.box)
            if iou < iou_thr:
                continue
            if gt.difficult or not in_range(gt.box):
                if iou > best_ignored_iou:
                    best_ignored, best_ignored_iou = j, iou
            elif not matched[j] and iou > best_iou:
                best_gt, best_iou = j, iou
        if best_gt is not None:
            matched[best_gt] = True
            records.append(MatchRecord(i, det.score, det.class_id, "tp", best_gt, best_iou))
        elif best_ignored is not None:
            records.append(MatchRecord(i, det.score, det.class_id, "ignored", best_ignored, best_ignored_iou))
        elif not in_range(det.box):
            records.append(MatchRecord(i, det.score, det.class_id, "ignored"))
        else:
            records.append(MatchRecord(i, det.score, det.class_id, "fp"))
    return records


def average_precision(
    scored_flags: list[tuple[float, bool]],
    gt_count: int,
    interpolation: str = "all_points",
) -> float | None:
    """AP from (score, is_tp) pairs against ``gt_count`` ground truths.

    Returns None when gt_count is 0 (class excluded from mean AP).
    """
    if interpolation not in ("all_points", "eleven_point"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    if gt_count < 0:
        raise ValueError("gt_count must be >= 0")
    if gt_count == 0:
        return None
    if not scored_flags:
        return 0.0
    order = sorted(range(len(scored_flags)), key=lambda i: (-scored_flags[i][0], i))
    tp = np.cumsum([1.0 if scored_flags[i][1] else 0.0 for i in order])
    fp = np.cumsum([0.0 if scored_flags[i][1] else 1.0 for i in order])
    recall = tp / gt_count
    precision = tp / np.maximum(tp + fp, 1e-12)
    if interpolation == "eleven_point":
        total = 0.0
        for r in np.linspace(0.0, 1.0, 11):
            mask = recall >= r - 1e-12
            total += float(precision[mask].max()) if mask.any() else 0.0
        return total / 11.0
    # all-points: area under the monotone precision envelope
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for k in range(len(mpre) - 2, -1, -1):
        mpre[k] = max(mpre[k], mpre[k + 1])
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0] + 1
    return float(np.sum((mrec[steps] - mrec[steps - 1]) * mpre[steps]))


def pr_curve(scored_flags: list[tuple[float, bool]], gt_count: int) -> list[tuple[float, float]]:
    """(recall, precision) samples in score-descending order."""
    if gt_count <= 0 or not scored_flags:
        return []
    order = sorted(range(len(scored_flags)), key=lambda i: (-scored_flags[i][0], i))
    tp = fp = 0
    out = []
    for i in order:
        if scored_flags[i][1]:
            tp += 1
        else:
            fp += 1
        out.append((tp / gt_count, tp / (tp + fp)))
    return out


def _truncate(dets: list[Detection], budget: int | None) -> list[Detection]:
    if budget is None or len(dets) <= budget:
        return dets
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))[:budget]
    keep = set(order)
    return [d for i, d in enumerate(dets) if i in keep]


def _collect(
    dets_by_image: dict[str, list[Detection]],
    gts_by_image: dict[str, list[GroundTruth]],
    iou_thr: float,
    budget: int | None,
    area_range: tuple[float, float] | None = None,
):
    """Per-class (score, tp) pairs, gt counts, and pooled TP/GT totals."""
    flags: dict[int, list[tuple[float, bool]]] = {}
    gt_counts: dict[int, int] = {}
    pooled_tp = 0
    pooled_gt = 0
    images = sorted(set(dets_by_image) | set(gts_by_image))
    for image in images:
        gts = gts_by_image.get(image, [])
        dets = _truncate(dets_by_image.get(image, []), budget)
        for gt in gts:
            counted = not gt.difficult and (
                area_range is None or area_range[0] <= gt.box.area < area_range[1]
            )
            if counted:
                gt_counts[gt.class_id] = gt_counts.get(gt.class_id, 0) + 1
                pooled_gt += 1
        for rec in match(dets, gts, iou_thr, area_range):
            if rec.status == "ignored":
                continue
            flags.setdefault(rec.class_id, []).append((rec.score, rec.status == "tp"))
            if rec.status == "tp":
                pooled_tp += 1
    return flags, gt_counts, pooled_tp, pooled_gt


def _mean_ap_at(
    dets_by_image,
    gts_by_image,
    iou_thr: float,
    interpolation: str,
    budget: int | None = None,
    area_range: tuple[float, float] | None = None,
) -> tuple[dict[int, float], float | None]:
    flags, gt_counts, _, _ = _collect(dets_by_image, gts_by_image, iou_thr, budget, area_range)
    per_class = {}
    for class_id, count in sorted(gt_counts.items()):
        ap = average_precision(flags.get(class_id, []), count, interpolation)
        if ap is not None:
            per_class[class_id] = ap
    mean = sum(per_class.values()) / len(per_class) if per_class else None
    return per_class, mean


def coco_summary(
    dets_by_image: dict[str, list[Detection]],
    gts_by_image: dict[str, list[GroundTruth]],
    budget: int = 300,
    interpolation: str = "all_points",
) -> EvalResult:
    """AP averaged over IoU 0.50:0.05:0.95 plus AR at a detection budget.

    AR is the mean over thresholds of pooled recall (total TP / total GT
    across classes) with detections truncated to the top-``budget`` per
    image by score. Size-bucketed APs (small/medium/large on w*h) are
    averaged over the same thresholds.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    per_class_acc: dict[int, list[float]] = {}
    per_thr_mean: dict[float, float | None] = {}
    recalls = []
    for thr in COCO_THRESHOLDS:
        per_class, mean = _mean_ap_at(dets_by_image, gts_by_image, thr, interpolation)
        per_thr_mean[thr] = mean
        for class_id, ap in per_class.items():
            per_class_acc.setdefault(class_id, []).append(ap)
        _, _, pooled_tp, pooled_gt = _collect(dets_by_image, gts_by_image, thr, budget)
        recalls.append(pooled_tp / pooled_gt if pooled_gt else 0.0)
    per_class_ap = {c: sum(v) / len(v) for c, v in sorted(per_class_acc.items())}
    mean_ap = sum(per_class_ap.values()) / len(per_class_ap) if per_class_ap else 0.0

    def bucket_ap(area_range):
        vals = []
        for thr in COCO_THRESHOLDS:
            _, mean = _mean_ap_at(dets_by_image, gts_by_image, thr, interpolation, area_range=area_range)
            if mean is not None:
                vals.append(mean)
        return sum(vals) / len(vals) if vals else None

    flags50, gt_counts50, _, _ = _collect(dets_by_image, gts_by_image, 0.5, None)
    curves = {
        c: pr_curve(flags50.get(c, []), n) for c, n in sorted(gt_counts50.items())
    }
    return EvalResult(
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        ap50=per_thr_mean[0.5] or 0.0,
        ap75=per_thr_mean[0.75] or 0.0,
        ar=sum(recalls) / len(recalls),
        pr_curves=curves,
        ap_small=bucket_ap((0.0, SIZE_SMALL_MAX)),
        ap_medium=bucket_ap((SIZE_SMALL_MAX, SIZE_MEDIUM_MAX)),
        ap_large=bucket_ap((SIZE_MEDIUM_MAX, float("inf"))),
    )


def voc_summary(
    dets_by_image: dict[str, list[Detection]],
    gts_by_image: dict[str, list[GroundTruth]],
    iou_thr: float = 0.5,
    interpolation: str = "all_points",
    budget: int = 300,
) -> EvalResult:
    """Single-threshold mAP (default polygon IoU 0.5) with recall at budget."""
    per_class, mean = _mean_ap_at(dets_by_image, gts_by_image, iou_thr, interpolation)
    flags, gt_counts, pooled_tp, pooled_gt = _collect(dets_by_image, gts_by_image, iou_thr, budget)
    curves = {c: pr_curve(flags.get(c, []), n) for c, n in sorted(gt_counts.items())}
    mean_ap = mean if mean is not None else 0.0
    return EvalResult(
        per_class_ap=per_class,
        mean_ap=mean_ap,
        ap50=mean_ap if iou_thr == 0.5 else 0.0,
        ap75=0.0,
        ar=pooled_tp / pooled_gt if pooled_gt else 0.0,
        pr_curves=curves,
    )
