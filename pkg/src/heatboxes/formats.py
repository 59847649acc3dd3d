"""File formats: THM1 rasters, TWT1 weights, and DOTA-style text files.

THM1 (heatmap/raster container)
    magic    4 bytes  b"THM1"
    width    u32 little-endian
    height   u32 little-endian
    channels u32 little-endian
    payload  width*height*channels float32 little-endian values,
             channel-major, row-major within each channel

TWT1 (refinement weights)
    magic    4 bytes  b"TWT1"
    groups   u32 LE   number of angle groups n
    in_ch    u32 LE   feature channels K (divisible by n)
    out_ch   u32 LE   heatmap channels C
    angles   n float32 LE radians
    per group (g = K / n), all float32 LE, row-major:
        proj_w (g, K), proj_b (g,), conv_w (g, g, 3, 3), conv_b (g,)
    fc_w (C, K), fc_b (C,)

Annotation text follows the DOTA convention: optional "imagesource:" /
"gsd:" header lines, then one object per line as
"x1 y1 x2 y2 x3 y3 x4 y4 category difficult" (difficult optional).
Detections serialize as submission lines "category score x1 ... y4".
An alternative "obb" line format carries boxes in center form with full
float precision: "class_index cx cy w h theta" for annotations and
"class_index score cx cy w h theta" for detections.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .encoder import GroundTruthScene, Heatmap
from .geometry import Detection, OrientedBox, min_area_rect, to_corners
from .refine import MacConfig, MacGroup

THM1_MAGIC = b"THM1"
TWT1_MAGIC = b"TWT1"


class FormatError(ValueError):
    """Raised for malformed files or annotation lines."""


# --------------------------------------------------------------------------
# THM1


def write_thm1(path: str | Path, data: np.ndarray) -> None:
    """Write a (C, H, W) float raster; heatmap writers pass values in [0, 1]."""
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise FormatError(f"raster must be (C, H, W), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("raster contains non-finite values")
    channels, height, width = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(THM1_MAGIC)
        fh.write(struct.pack("<III", width, height, channels))
        fh.write(payload)


def read_thm1(path: str | Path) -> np.ndarray:
    """Read a THM1 raster back as a (C, H, W) float32 array."""
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != THM1_MAGIC:
        raise FormatError(f"{path}: not a THM1 file")
    width, height, channels = struct.unpack("<III", blob[4:16])
    expected = 16 + 4 * width * height * channels
    if len(blob) != expected:
        raise FormatError(f"{path}: payload length {len(blob) - 16} != {expected - 16}")
    flat = np.frombuffer(blob, dtype="<f4", offset=16)
    return flat.reshape(channels, height, width).astype(np.float32)


def write_heatmap(path: str | Path, heatmap: Heatmap) -> None:
    write_thm1(path, heatmap.data)


def read_heatmap(path: str | Path) -> Heatmap:
    return Heatmap(read_thm1(path))


# --------------------------------------------------------------------------
# TWT1


def write_twt1(path: str | Path, cfg: MacConfig) -> None:
    parts = [TWT1_MAGIC, struct.pack("<III", cfg.n, cfg.in_channels, cfg.out_channels)]
    parts.append(np.asarray(cfg.angles, dtype="<f4").tobytes())
    for grp in cfg.groups:
        for tensor in (grp.proj_w, grp.proj_b, grp.conv_w, grp.conv_b):
            parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(cfg.fc_w, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(cfg.fc_b, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_twt1(path: str | Path) -> MacConfig:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != TWT1_MAGIC:
        raise FormatError(f"{path}: not a TWT1 file")
    n, in_ch, out_ch = struct.unpack("<III", blob[4:16])
    if n == 0 or in_ch == 0 or in_ch % n != 0:
        raise FormatError(f"{path}: invalid group/channel header ({n}, {in_ch})")
    g = in_ch // n
    offset = 16

    def take(count: int, shape) -> np.ndarray:
        nonlocal offset
        nbytes = 4 * count
        if offset + nbytes > len(blob):
            raise FormatError(f"{path}: truncated payload")
        out = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += nbytes
        return out.astype(np.float64)

    angles = tuple(float(a) for a in take(n, (n,)))
    groups = []
    for _ in range(n):
        groups.append(
            MacGroup(
                proj_w=take(g * in_ch, (g, in_ch)),
                proj_b=take(g, (g,)),
                conv_w=take(g * g * 9, (g, g, 3, 3)),
                conv_b=take(g, (g,)),
            )
        )
    fc_w = take(out_ch * in_ch, (out_ch, in_ch))
    fc_b = take(out_ch, (out_ch,))
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return MacConfig(angles=angles, groups=groups, fc_w=fc_w, fc_b=fc_b)


# --------------------------------------------------------------------------
# category tables and DOTA-style text


def load_categories(path: str | Path) -> list[str]:
    """Newline-separated category names; line index = channel index."""
    names = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n]
    if not names:
        raise FormatError(f"{path}: empty category table")
    if len(set(names)) != len(names):
        raise FormatError(f"{path}: duplicate category names")
    return names


def parse_dota(
    text: str,
    categories: list[str],
    image_width: int,
    image_height: int,
    downsample: int = 2,
) -> GroundTruthScene:
    """Scene from DOTA annotation text.

    Header lines starting with "imagesource:" or "gsd:" are skipped. Each
    quad is converted to an oriented box via its minimum-area rectangle.
    Malformed lines and unknown categories raise FormatError with the line
    number.
    """
    index = {name: i for i, name in enumerate(categories)}
    boxes: list[tuple[OrientedBox, int]] = []
    difficult_flags: list[bool] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("imagesource:") or line.startswith("gsd:"):
            continue
        tokens = line.split()
        if len(tokens) < 9:
            raise FormatError(f"line {lineno}: expected 8 coordinates plus category, got {len(tokens)} tokens")
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad coordinate: {exc}") from None
        if not all(math.isfinite(c) for c in coords):
            raise FormatError(f"line {lineno}: non-finite coordinate")
        category = tokens[8]
        if category not in index:
            raise FormatError(
                f"line {lineno}: unknown category {category!r}; known: {', '.join(categories)}"
            )
        difficult = False
        if len(tokens) >= 10:
            difficult = tokens[9] not in ("0", "")
        quad = [(coords[2 * i], coords[2 * i + 1]) for i in range(4)]
        boxes.append((min_area_rect(quad), index[category]))
        difficult_flags.append(difficult)
    return GroundTruthScene(
        image_width=image_width,
        image_height=image_height,
        num_classes=len(categories),
        boxes=boxes,
        downsample=downsample,
        difficult=difficult_flags,
    )


def serialize_dota(scene: GroundTruthScene, categories: list[str]) -> str:
    """Annotation text reproducing the scene's boxes as corner quads."""
    lines = []
    for (box, class_id), diff in zip(scene.boxes, scene.difficult):
        corners = to_corners(box)
        coords = " ".join(f"{v:.9f}" for v in corners.ravel())
        lines.append(f"{coords} {categories[class_id]} {1 if diff else 0}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_obb_annotations(
    text: str,
    num_classes: int,
    image_width: int,
    image_height: int,
    downsample: int = 2,
) -> GroundTruthScene:
    """Scene from center-form lines "class_index cx cy w h theta"."""
    boxes: list[tuple[OrientedBox, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 6:
            raise FormatError(f"line {lineno}: expected 6 fields, got {len(tokens)}")
        try:
            class_id = int(tokens[0])
            cx, cy, w, h, theta = (float(t) for t in tokens[1:])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if not 0 <= class_id < num_classes:
            raise FormatError(f"line {lineno}: class index {class_id} out of range [0, {num_classes})")
        boxes.append((OrientedBox(cx, cy, w, h, theta), class_id))
    return GroundTruthScene(
        image_width=image_width,
        image_height=image_height,
        num_classes=num_classes,
        boxes=boxes,
        downsample=downsample,
    )


def format_submission(dets: list[Detection], categories: list[str], scale: float = 1.0) -> str:
    """DOTA submission lines "category score x1 y1 ... y4"."""
    lines = []
    for det in dets:
        corners = to_corners(det.box) * scale
        coords = " ".join(f"{v:.4f}" for v in corners.ravel())
        lines.append(f"{categories[det.class_id]} {det.score:.6f} {coords}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_submission(text: str, categories: list[str]) -> list[Detection]:
    """Detections from submission lines; quads convert via min-area rect."""
    index = {name: i for i, name in enumerate(categories)}
    dets = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise FormatError(f"line {lineno}: expected 10 fields, got {len(tokens)}")
        category = tokens[0]
        if category not in index:
            raise FormatError(f"line {lineno}: unknown category {category!r}")
        try:
            score = float(tokens[1])
            coords = [float(t) for t in tokens[2:]]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        quad = [(coords[2 * i], coords[2 * i + 1]) for i in range(4)]
        dets.append(Detection(box=min_area_rect(quad), score=score, class_id=index[category]))
    return dets


def format_obb_detections(dets: list[Detection]) -> str:
    """Full-precision center-form lines "class score cx cy w h theta"."""
    lines = []
    for det in dets:
        b = det.box
        lines.append(
            f"{det.class_id} {det.score!r} {b.cx!r} {b.cy!r} {b.w!r} {b.h!r} {b.theta!r}"
        )
    return "\n".join(lines) + ("\n" if lines else "")
