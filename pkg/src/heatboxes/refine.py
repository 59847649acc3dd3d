"""Forward-pass numerics for rotation convolution and heatmap refinement.

A rotation convolution applies a plain 3x3 convolution in a rotated,
rescaled frame: shrink the content by 1/(sin t + cos t) so the rotated
content still fits the canvas, rotate by t, convolve, rotate back (by -t,
identical to the nominal 2*pi - t), and undo the rescale. A multi-angle
block splits channels into n groups via 1x1 projections, applies a rotation
convolution per group at a fixed angle, and concatenates the outputs.

The cascade repeats the block on residual-added features: Y_1 = B(X),
Y_r = B(X + Y_(r-1)); each stage emits a heatmap through a 1x1 projection
clamped to [0, 1]. All arithmetic is float64 and fully deterministic; the
weights are supplied externally (file or seeded initializer), never trained
here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import Heatmap

DEFAULT_ANGLES = (0.0, math.pi / 6, math.pi / 4, math.pi / 3)


@dataclass
class FeatureMap:
    """Float raster of shape (K, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"feature map must be (K, H, W), got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ValueError(f"feature dims must be >= 1, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature map contains non-finite values")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass
class MacGroup:
    """Weights for one angle group: 1x1 projection then 3x3 convolution."""

    proj_w: np.ndarray  # (g, K)
    proj_b: np.ndarray  # (g,)
    conv_w: np.ndarray  # (g, g, 3, 3)
    conv_b: np.ndarray  # (g,)

    def __post_init__(self):
        self.proj_w = np.asarray(self.proj_w, dtype=np.float64)
        self.proj_b = np.asarray(self.proj_b, dtype=np.float64)
        self.conv_w = np.asarray(self.conv_w, dtype=np.float64)
        self.conv_b = np.asarray(self.conv_b, dtype=np.float64)


@dataclass
class MacConfig:
    """Angles plus per-group weights and the final 1x1 heatmap projection."""

    angles: tuple[float, ...]
    groups: list[MacGroup]
    fc_w: np.ndarray  # (C, K)
    fc_b: np.ndarray  # (C,)
    in_channels: int = field(init=False)

    def __post_init__(self):
        self.fc_w = np.asarray(self.fc_w, dtype=np.float64)
        self.fc_b = np.asarray(self.fc_b, dtype=np.float64)
        n = len(self.angles)
        if n == 0 or n != len(self.groups):
            raise ValueError(f"need one weight group per angle, got {len(self.groups)} groups for {n} angles")
        for a in self.angles:
            if not 0.0 <= a < math.pi / 2:
                raise ValueError(f"angles must lie in [0, pi/2), got {a}")
        k = self.groups[0].proj_w.shape[1]
        if k % n != 0:
            raise ValueError(f"channel count {k} not divisible by group count {n}")
        g = k // n
        for i, grp in enumerate(self.groups):
            if grp.proj_w.shape != (g, k) or grp.proj_b.shape != (g,):
                raise ValueError(f"group {i}: projection weights must be ({g}, {k}) / ({g},)")
            if grp.conv_w.shape != (g, g, 3, 3) or grp.conv_b.shape != (g,):
                raise ValueError(f"group {i}: conv weights must be ({g}, {g}, 3, 3) / ({g},)")
        if self.fc_w.ndim != 2 or self.fc_w.shape[1] != k or self.fc_b.shape != (self.fc_w.shape[0],):
            raise ValueError("fc weights must be (C, K) with bias (C,)")
        self.in_channels = k

    @property
    def n(self) -> int:
        return len(self.angles)

    @property
    def out_channels(self) -> int:
        return self.fc_w.shape[0]


def _snap(x: float) -> float:
    for v in (-1.0, 0.0, 1.0):
        if abs(x - v) < 1e-12:
            return v
    return x


def _sample_bilinear(data: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample (K, H, W) data at float coords, zero outside the raster."""
    _, h, w = data.shape
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros((data.shape[0],) + sx.shape, dtype=np.float64)
    for dx, dy, wt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xc = np.clip(xi, 0, w - 1)
        yc = np.clip(yi, 0, h - 1)
        out += data[:, yc, xc] * np.where(valid, wt, 0.0)
    return out


def rotate_resample(f: FeatureMap, angle: float) -> FeatureMap:
    """Rotate content by ``angle`` about the raster center ((W-1)/2, (H-1)/2).

    Bilinear resampling; samples falling outside the raster read as zero.
    Quarter-turn angles hit the lattice exactly. ``angle`` 0 is an identity.
    """
    c = _snap(math.cos(angle))
    s = _snap(math.sin(angle))
    if c == 1.0 and s == 0.0:
        return FeatureMap(f.data.copy())
    _, h, w = f.data.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    xs = np.arange(w, dtype=np.float64)[None, :] - cx
    ys = np.arange(h, dtype=np.float64)[:, None] - cy
    # inverse mapping: source = R(-angle) @ (p - center) + center
    sx = c * xs + s * ys + cx
    sy = -s * xs + c * ys + cy
    return FeatureMap(_sample_bilinear(f.data, sx, sy))


def rescale(f: FeatureMap, factor: float) -> FeatureMap:
    """Scale content by ``factor`` about the center; canvas size unchanged."""
    if factor <= 0:
        raise ValueError(f"factor must be > 0, got {factor}")
    if factor == 1.0:
        return FeatureMap(f.data.copy())
    _, h, w = f.data.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    xs = (np.arange(w, dtype=np.float64)[None, :] - cx) / factor + cx
    ys = (np.arange(h, dtype=np.float64)[:, None] - cy) / factor + cy
    sx = np.broadcast_to(xs, (h, w))
    sy = np.broadcast_to(ys, (h, w))
    return FeatureMap(_sample_bilinear(f.data, sx, sy))


def conv3x3(f: FeatureMap, weights: np.ndarray, bias: np.ndarray) -> FeatureMap:
    """Stride-1 zero-padded 3x3 cross-correlation.

    Accumulates plane by plane in (in_channel, ky, kx) order so results are
    bit-reproducible against a scalar reference loop.
    """
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 4 or weights.shape[2:] != (3, 3):
        raise ValueError(f"weights must be (out, in, 3, 3), got {weights.shape}")
    out_ch, in_ch = weights.shape[:2]
    if in_ch != f.channels:
        raise ValueError(f"channel mismatch: weights expect {in_ch}, feature map has {f.channels}")
    if bias.shape != (out_ch,):
        raise ValueError(f"bias must be ({out_ch},), got {bias.shape}")
    _, h, w = f.data.shape
    padded = np.zeros((in_ch, h + 2, w + 2), dtype=np.float64)
    padded[:, 1 : h + 1, 1 : w + 1] = f.data
    out = np.empty((out_ch, h, w), dtype=np.float64)
    for oc in range(out_ch):
        acc = np.full((h, w), bias[oc], dtype=np.float64)
        for ic in range(in_ch):
            for ky in range(3):
                for kx in range(3):
                    acc += weights[oc, ic, ky, kx] * padded[ic, ky : ky + h, kx : kx + w]
        out[oc] = acc
    return FeatureMap(out)


def conv1x1(f: FeatureMap, weights: np.ndarray, bias: np.ndarray) -> FeatureMap:
    """Pointwise channel projection."""
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != f.channels:
        raise ValueError(f"weights must be (out, {f.channels}), got {weights.shape}")
    out = np.einsum("oc,chw->ohw", weights, f.data) + bias[:, None, None]
    return FeatureMap(out)


def rconv(f: FeatureMap, angle: float, weights: np.ndarray, bias: np.ndarray) -> FeatureMap:
    """3x3 convolution in a rotated, rescaled frame.

    rescale(1/(sin+cos)) -> rotate(angle) -> conv3x3 -> rotate(-angle)
    -> rescale(sin+cos), in exactly that order. At angle 0 every resampling
    is an identity and the result equals conv3x3 bit-exactly.
    """
    if not 0.0 <= angle < math.pi / 2:
        raise ValueError(f"angle must lie in [0, pi/2), got {angle}")
    k = math.sin(angle) + math.cos(angle)
    out = rescale(f, 1.0 / k)
    out = rotate_resample(out, angle)
    out = conv3x3(out, weights, bias)
    out = rotate_resample(out, -angle)  # same as rotating by 2*pi - angle
    return rescale(out, k)


def mac_forward(f: FeatureMap, cfg: MacConfig) -> FeatureMap:
    """Multi-angle block: per-group 1x1 projection, rconv, channel concat."""
    if f.channels != cfg.in_channels:
        raise ValueError(f"feature map has {f.channels} channels, config expects {cfg.in_channels}")
    parts = []
    for angle, grp in zip(cfg.angles, cfg.groups):
        projected = conv1x1(f, grp.proj_w, grp.proj_b)
        parts.append(rconv(projected, angle, grp.conv_w, grp.conv_b).data)
    return FeatureMap(np.concatenate(parts, axis=0))


def _fc_heatmap(y: FeatureMap, cfg: MacConfig) -> Heatmap:
    raw = conv1x1(y, cfg.fc_w, cfg.fc_b).data
    return Heatmap(np.clip(raw, 0.0, 1.0).astype(np.float32))


def cascade_forward(x: FeatureMap, cfg: MacConfig, steps: int) -> list[Heatmap]:
    """Repeated refinement: Y_1 = B(X), Y_r = B(X + Y_(r-1)), H_r = clamp(fc(Y_r)).

    Returns [H_1, ..., H_steps]. The clamp to [0, 1] keeps the stage outputs
    valid heatmaps while the whole pass stays piecewise linear.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    heatmaps = []
    y = mac_forward(x, cfg)
    heatmaps.append(_fc_heatmap(y, cfg))
    for _ in range(steps - 1):
        y = mac_forward(FeatureMap(x.data + y.data), cfg)
        heatmaps.append(_fc_heatmap(y, cfg))
    return heatmaps


def init_mac_config(
    seed: int,
    in_channels: int,
    out_channels: int,
    n: int = 4,
    angles: tuple[float, ...] = DEFAULT_ANGLES,
) -> MacConfig:
    """Seeded pseudo-random weights (NumPy PCG64), float32-quantized.

    Weights are scaled He-style; biases start at zero. Float32 quantization
    makes in-memory weights identical to their serialized form.
    """
    if in_channels % n != 0:
        raise ValueError(f"in_channels {in_channels} must be divisible by n={n}")
    if len(angles) != n:
        raise ValueError(f"need {n} angles, got {len(angles)}")
    rng = np.random.default_rng(seed)
    g = in_channels // n
    groups = []
    for _ in range(n):
        proj_w = (rng.standard_normal((g, in_channels)) * math.sqrt(2.0 / in_channels)).astype(np.float32)
        conv_w = (rng.standard_normal((g, g, 3, 3)) * math.sqrt(2.0 / (g * 9.0))).astype(np.float32)
        groups.append(
            MacGroup(
                proj_w=proj_w,
                proj_b=np.zeros(g, dtype=np.float32),
                conv_w=conv_w,
                conv_b=np.zeros(g, dtype=np.float32),
            )
        )
    fc_w = (rng.standard_normal((out_channels, in_channels)) * math.sqrt(1.0 / in_channels)).astype(np.float32)
    fc_b = np.zeros(out_channels, dtype=np.float32)
    return MacConfig(angles=tuple(angles), groups=groups, fc_w=fc_w, fc_b=fc_b)
