"""Command-line surface tying the codec, loss, refinement, and metrics together.

Every subcommand is deterministic for a fixed seed: randomness flows only
through NumPy's seeded PCG64 generator, floats are printed with explicit
formats, and directory listings are sorted before processing. Commands exit
nonzero with a one-line diagnostic on invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .decoder import decode
from .encoder import GroundTruthScene, Heatmap, encode, make_swm
from .evaluation import GroundTruth, coco_summary, match, voc_summary
from .formats import (
    FormatError,
    format_obb_detections,
    format_submission,
    load_categories,
    parse_dota,
    parse_obb_annotations,
    parse_submission,
    read_heatmap,
    read_thm1,
    read_twt1,
    write_thm1,
    write_twt1,
)
from .geometry import polygon_iou
from .kernels import KernelSpec, scale_factor
from .loss import fpem_sample, masked_mse
from .refine import DEFAULT_ANGLES, FeatureMap, cascade_forward, init_mac_config
from .synth import synth_scene

KERNEL_NAMES = {
    "tricube": "tricube",
    "gaussian": "gaussian",
    "binary": "binary_rect",
    "effective": "effective_rect",
}

DEFAULT_DECODE_UPSAMPLE = 4


def _kernel_spec(args) -> KernelSpec:
    return KernelSpec(family=KERNEL_NAMES[args.kernel], gamma=args.gamma)


def _load_scene(args) -> tuple[GroundTruthScene, list[str]]:
    text = Path(args.ann).read_text(encoding="utf-8")
    if args.ann_format == "dota":
        if not args.categories:
            raise FormatError("--categories is required for DOTA annotations")
        categories = load_categories(args.categories)
        scene = parse_dota(text, categories, args.width, args.height, args.downsample)
    else:
        if args.channels is None:
            raise FormatError("--channels is required for obb annotations")
        categories = [f"class{i}" for i in range(args.channels)]
        scene = parse_obb_annotations(text, args.channels, args.width, args.height, args.downsample)
    return scene, categories


def _categories_for_channels(args, channels: int) -> list[str]:
    if getattr(args, "categories", None):
        cats = load_categories(args.categories)
        if len(cats) < channels:
            raise FormatError(
                f"category table has {len(cats)} entries but the heatmap has {channels} channels"
            )
        return cats
    return [f"class{i}" for i in range(channels)]


def cmd_encode(args) -> int:
    scene, _ = _load_scene(args)
    heatmap = encode(scene, _kernel_spec(args))
    write_thm1(args.out, heatmap.data)
    print(f"encoded {len(scene.boxes)} box(es) -> {args.out} "
          f"({heatmap.width}x{heatmap.height}x{heatmap.channels})")
    return 0


def cmd_swm(args) -> int:
    scene, _ = _load_scene(args)
    swm = make_swm(scene)
    write_thm1(args.out, swm.data)
    print(f"swm for {swm.object_count} object(s), total size {swm.total_size:.6f} px^2 -> {args.out}")
    return 0


def cmd_decode(args) -> int:
    heatmap = read_heatmap(args.heatmap)
    dets = decode(heatmap, tau=args.tau, gamma=args.gamma,
                  min_area_px=args.min_area, upsample=args.upsample)
    categories = _categories_for_channels(args, heatmap.channels)
    if args.format == "obb":
        text = format_obb_detections(dets)
    else:
        text = format_submission(dets, categories, scale=args.scale)
    Path(args.out).write_text(text, encoding="utf-8")
    if args.per_class_dir:
        outdir = Path(args.per_class_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        for class_id, name in enumerate(categories):
            class_dets = [d for d in dets if d.class_id == class_id]
            (outdir / f"{name}.txt").write_text(
                format_submission(class_dets, categories, scale=args.scale), encoding="utf-8"
            )
    print(f"decoded {len(dets)} detection(s) -> {args.out}")
    return 0


def cmd_loss(args) -> int:
    pred = read_heatmap(args.pred)
    gt = read_heatmap(args.gt)
    if args.width is None:
        args.width = gt.width * args.downsample
    if args.height is None:
        args.height = gt.height * args.downsample
    scene, _ = _load_scene(args)
    if scene.num_classes != gt.channels:
        raise FormatError(
            f"annotation implies {scene.num_classes} channels, ground-truth heatmap has {gt.channels}"
        )
    swm = make_swm(scene)
    sample = fpem_sample(pred, gt, ratio=args.ratio)
    value = masked_mse(pred, gt, swm, sample)
    payload = {
        "positives": len(sample.positives),
        "false_positives": sample.false_positive_count,
        "sampled_false_positives": len(sample.sampled_false_positives),
        "loss": value,
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"positives={payload['positives']} false_positives={payload['false_positives']} "
              f"sampled={payload['sampled_false_positives']} loss={value:.12g}")
    return 0


def cmd_refine(args) -> int:
    features = FeatureMap(read_thm1(args.infile).astype(np.float64))
    cfg = read_twt1(args.weights)
    heatmaps = cascade_forward(features, cfg, steps=args.steps)
    for i, hm in enumerate(heatmaps, start=1):
        out = f"{args.out_prefix}{i}.thm"
        write_thm1(out, hm.data)
        print(f"step {i}: {hm.width}x{hm.height}x{hm.channels} -> {out}")
    return 0


def cmd_init_weights(args) -> int:
    angles = DEFAULT_ANGLES if args.groups == 4 else tuple(
        i * (math.pi / 2) / args.groups for i in range(args.groups)
    )
    cfg = init_mac_config(
        seed=args.seed, in_channels=args.channels, out_channels=args.out_channels,
        n=args.groups, angles=angles,
    )
    write_twt1(args.out, cfg)
    print(f"weights: {args.groups} group(s), K={args.channels}, C={args.out_channels} -> {args.out}")
    return 0


def _roundtrip_one(seed: int, args):
    spec = _kernel_spec(args)
    scene = synth_scene(
        seed=seed,
        image_dims=(args.image_size, args.image_size),
        box_count_range=(args.min_boxes, args.max_boxes),
        size_range=(args.min_side, args.max_side),
        max_pair_iou=args.max_pair_iou,
        num_classes=args.classes,
        downsample=1,
    )
    heatmap = encode(scene, spec)
    dets = decode(heatmap, tau=args.tau, gamma=args.gamma, upsample=args.upsample)
    gts = [GroundTruth(box, class_id) for box, class_id in scene.boxes]
    ious = {j: 0.0 for j in range(len(gts))}
    for record in match(dets, gts, iou_thr=1e-9):
        if record.status == "tp":
            ious[record.gt_index] = record.iou
    return scene, dets, [ious[j] for j in range(len(gts))]


def cmd_roundtrip(args) -> int:
    seeds = [args.seed + k for k in range(args.scenes)]
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(lambda s: _roundtrip_one(s, args), seeds))
    else:
        results = [_roundtrip_one(s, args) for s in seeds]
    all_ious: list[float] = []
    dets_by_image = {}
    gts_by_image = {}
    for seed, (scene, dets, ious) in zip(seeds, results):
        key = f"scene{seed}"
        dets_by_image[key] = dets
        gts_by_image[key] = [GroundTruth(b, c) for b, c in scene.boxes]
        all_ious.extend(ious)
    total = len(all_ious)
    print(f"scenes={args.scenes} boxes={total} kernel={args.kernel} "
          f"tau={args.tau:g} gamma={args.gamma:g} scale_factor={scale_factor(args.tau, args.gamma):.6f}")
    if total == 0:
        print("mAP@0.5=n/a (no ground truth)")
        return 0
    hist, _ = np.histogram(all_ious, bins=np.linspace(0.0, 1.0, 11))
    for i, count in enumerate(hist):
        print(f"iou [{i / 10:.1f},{(i + 1) / 10:.1f}{']' if i == 9 else ')'} {count}")
    recovered = sum(1 for v in all_ious if v >= 0.90)
    print(f"recovered_iou>=0.90: {recovered}/{total} = {recovered / total:.4f}")
    result = voc_summary(dets_by_image, gts_by_image, iou_thr=0.5)
    print(f"mAP@0.5={result.mean_ap:.6f}")
    return 0


def _read_eval_dirs(args):
    categories = load_categories(args.categories)
    gt_dir, det_dir = Path(args.gt), Path(args.dets)
    for d in (gt_dir, det_dir):
        if not d.is_dir():
            raise FormatError(f"not a directory: {d}")
    gts_by_image = {}
    dets_by_image = {}
    for path in sorted(gt_dir.glob("*.txt")):
        scene = parse_dota(path.read_text(encoding="utf-8"), categories, 1, 1, downsample=1)
        gts_by_image[path.stem] = [
            GroundTruth(box, class_id, diff)
            for (box, class_id), diff in zip(scene.boxes, scene.difficult)
        ]
    for path in sorted(det_dir.glob("*.txt")):
        dets_by_image[path.stem] = parse_submission(path.read_text(encoding="utf-8"), categories)
    return categories, dets_by_image, gts_by_image


def cmd_eval(args) -> int:
    categories, dets_by_image, gts_by_image = _read_eval_dirs(args)
    if args.style == "coco":
        result = coco_summary(dets_by_image, gts_by_image, budget=args.budget,
                              interpolation=args.interp)
    else:
        result = voc_summary(dets_by_image, gts_by_image, iou_thr=args.iou,
                             interpolation=args.interp, budget=args.budget)
    payload = {
        "style": args.style,
        "images": len(sorted(set(dets_by_image) | set(gts_by_image))),
        "per_class_ap": {categories[c]: ap for c, ap in result.per_class_ap.items()},
        "mAP": result.mean_ap,
        "AP50": result.ap50,
        "AP75": result.ap75,
        f"AR{args.budget}": result.ar,
    }
    if args.style == "coco":
        payload["AP_small"] = result.ap_small
        payload["AP_medium"] = result.ap_medium
        payload["AP_large"] = result.ap_large
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"style={args.style} images={payload['images']}")
        for name, ap in payload["per_class_ap"].items():
            print(f"class {name} ap={ap:.6f}")
        print(f"mAP={result.mean_ap:.6f} AP50={result.ap50:.6f} "
              f"AP75={result.ap75:.6f} AR{args.budget}={result.ar:.6f}")
    return 0


def cmd_overlay(args) -> int:
    from PIL import Image, ImageDraw

    from .geometry import to_corners

    image = Image.open(args.image).convert("RGB")
    categories = None
    if args.categories:
        categories = load_categories(args.categories)
    text = Path(args.dets).read_text(encoding="utf-8")
    if categories is None:
        seen = []
        for line in text.splitlines():
            if line.strip():
                name = line.split()[0]
                if name not in seen:
                    seen.append(name)
        categories = seen or ["class0"]
    dets = parse_submission(text, categories)
    palette = [(230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
               (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230)]
    draw = ImageDraw.Draw(image)
    for det in dets:
        corners = [tuple(p) for p in to_corners(det.box)]
        draw.polygon(corners, outline=palette[det.class_id % len(palette)], width=2)
    image.save(args.out, format="PNG")
    print(f"overlay with {len(dets)} box(es) -> {args.out}")
    return 0


def _parse_quad(text: str):
    values = [float(t) for t in text.replace(",", " ").split()]
    if len(values) != 8:
        raise FormatError(f"expected 8 coordinates, got {len(values)}")
    return [(values[2 * i], values[2 * i + 1]) for i in range(4)]


def cmd_iou(args) -> int:
    value = polygon_iou(_parse_quad(args.a), _parse_quad(args.b))
    if args.json:
        print(json.dumps({"iou": value}))
    else:
        print(f"iou={value!r}")
    return 0


def _add_global_overrides(p):
    # accept the global flags after the subcommand too; SUPPRESS keeps the
    # root parser's value when they are absent here
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)


def _add_scene_args(p, downsample_default=2):
    p.add_argument("--ann", required=True, help="annotation file")
    p.add_argument("--categories", help="newline-separated category table (DOTA format)")
    p.add_argument("--channels", type=int, help="channel count (obb format)")
    p.add_argument("--ann-format", choices=("dota", "obb"), default="dota")
    p.add_argument("--width", type=int, help="image width in pixels")
    p.add_argument("--height", type=int, help="image height in pixels")
    p.add_argument("--downsample", type=int, default=downsample_default,
                   help="heatmap downsample rate R")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatboxes",
        description="Codec between oriented boxes and compact-kernel heatmaps",
    )
    parser.add_argument("--version", action="version", version=f"heatboxes {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for scene batches")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="render annotations into a THM1 heatmap")
    _add_scene_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel", choices=sorted(KERNEL_NAMES), default="tricube")
    p.add_argument("--gamma", type=float, default=7.0)
    _add_global_overrides(p)
    p.set_defaults(func=cmd_encode, needs_dims=True)

    p = sub.add_parser("swm", help="write the size-weight mask as THM1")
    _add_scene_args(p)
    p.add_argument("--out", required=True)
    _add_global_overrides(p)
    p.set_defaults(func=cmd_swm, needs_dims=True)

    p = sub.add_parser("decode", help="extract detections from a THM1 heatmap")
    p.add_argument("--heatmap", required=True)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=7.0)
    p.add_argument("--min-area", type=int, default=3)
    p.add_argument("--upsample", type=int, default=DEFAULT_DECODE_UPSAMPLE,
                   help="measurement refinement factor (1 disables)")
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply output coordinates (e.g. the downsample rate)")
    p.add_argument("--out", required=True)
    p.add_argument("--categories")
    p.add_argument("--format", choices=("dota", "obb"), default="dota")
    p.add_argument("--per-class-dir", help="also write one submission file per category")
    _add_global_overrides(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("roundtrip", help="encode/decode synthetic scenes and report fidelity")
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=7.0)
    p.add_argument("--kernel", choices=sorted(KERNEL_NAMES), default="tricube")
    p.add_argument("--upsample", type=int, default=DEFAULT_DECODE_UPSAMPLE)
    p.add_argument("--image-size", type=int, default=896)
    p.add_argument("--min-boxes", type=int, default=1)
    p.add_argument("--max-boxes", type=int, default=50)
    p.add_argument("--min-side", type=float, default=8.0)
    p.add_argument("--max-side", type=float, default=128.0)
    p.add_argument("--max-pair-iou", type=float, default=0.05)
    p.add_argument("--classes", type=int, default=2)
    _add_global_overrides(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("loss", help="FPEM-sampled size-weighted MSE between two THM1 files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    _add_scene_args(p)
    p.add_argument("--ratio", type=int, default=3)
    p.add_argument("--json", action="store_true")
    _add_global_overrides(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("refine", help="cascade refinement forward pass on THM1 features")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--out-prefix", default="H")
    _add_global_overrides(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("init-weights", help="write seeded random TWT1 weights")
    p.add_argument("--channels", type=int, required=True, help="feature channels K")
    p.add_argument("--out-channels", type=int, required=True, help="heatmap channels C")
    p.add_argument("--groups", type=int, default=4)
    p.add_argument("--out", required=True)
    _add_global_overrides(p)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("eval", help="score detection files against ground truth")
    p.add_argument("--dets", required=True, help="directory of submission files")
    p.add_argument("--gt", required=True, help="directory of DOTA annotation files")
    p.add_argument("--categories", required=True)
    p.add_argument("--style", choices=("voc", "coco"), default="voc")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--interp", choices=("all_points", "eleven_point"), default="all_points")
    p.add_argument("--budget", type=int, default=300)
    p.add_argument("--json", action="store_true")
    _add_global_overrides(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", help="draw detection outlines on a PNG")
    p.add_argument("--image", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--categories")
    _add_global_overrides(p)
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("iou", help="polygon IoU of two quads given as 8 coordinates")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--json", action="store_true")
    _add_global_overrides(p)
    p.set_defaults(func=cmd_iou)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_dims", False) and (args.width is None or args.height is None):
        print("error: --width and --height are required", file=sys.stderr)
        return 2
    if getattr(args, "seed", None) is None:
        args.seed = 0
    try:
        return args.func(args)
    except (FormatError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
