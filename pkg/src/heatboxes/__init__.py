"""heatboxes: codec between oriented boxes and compact-kernel heatmaps."""

from .decoder import BinaryMap, ComponentLabelMap, binarize, component_to_box, decode, label_components
from .encoder import (
    GroundTruthScene,
    Heatmap,
    SizeWeightMask,
    encode,
    make_swm,
    upsample_bilinear,
)
from .evaluation import EvalResult, GroundTruth, coco_summary, match, voc_summary
from .geometry import (
    Detection,
    OrientedBox,
    box_iou,
    canonicalize,
    min_area_rect,
    nms,
    polygon_iou,
    soft_nms,
    to_corners,
)
from .kernels import KernelSpec, eval_kernel, eval_tricube, profile_level, scale_factor
from .loss import PixelSample, fpem_sample, masked_mse
from .refine import FeatureMap, MacConfig, cascade_forward, conv3x3, mac_forward, rconv
from .synth import synth_scene

__version__ = "0.1.0"

__all__ = [
    "BinaryMap",
    "ComponentLabelMap",
    "Detection",
    "EvalResult",
    "FeatureMap",
    "GroundTruth",
    "GroundTruthScene",
    "Heatmap",
    "KernelSpec",
    "MacConfig",
    "OrientedBox",
    "PixelSample",
    "SizeWeightMask",
    "__version__",
    "binarize",
    "box_iou",
    "canonicalize",
    "cascade_forward",
    "coco_summary",
    "component_to_box",
    "conv3x3",
    "decode",
    "encode",
    "eval_kernel",
    "eval_tricube",
    "fpem_sample",
    "label_components",
    "mac_forward",
    "make_swm",
    "masked_mse",
    "match",
    "min_area_rect",
    "nms",
    "polygon_iou",
    "profile_level",
    "rconv",
    "scale_factor",
    "soft_nms",
    "synth_scene",
    "to_corners",
    "upsample_bilinear",
    "voc_summary",
]
