"""Promptable fire-segmentation evaluation toolkit.

Turns detector boxes into prompt sets (points, boxes, hybrids), runs them
through pluggable segmentation backends, and scores the predictions with
standard segmentation metrics. Includes dataset loaders, a latency/FPS
benchmark harness, and a line-delimited wire protocol for external model
servers.
"""

from .backends import (
    BackendSpec,
    ExternalBackend,
    HsvThresholdBackend,
    OracleBackend,
    SegmentResponse,
    detect,
    gt_boxes,
    label_components,
    make_backend,
    segment,
)
from .bench import (
    BenchReport,
    BoxSource,
    EvalConfig,
    EvalReport,
    VideoProfile,
    emit_report,
    evaluate,
    profile_video,
    render_overlay,
)
from .datasets import (
    DatasetManifest,
    ManifestEntry,
    VideoSequence,
    load_manifest,
    load_video,
    pair_by_stem,
    write_manifest,
)
from .errors import (
    BackendError,
    DatasetError,
    MaskShapeError,
    PromptError,
    PromptsegError,
    ProtocolError,
)
from .masks import (
    ConfusionCounts,
    MetricBundle,
    binarize,
    confusion_counts,
    dice,
    fw_iou,
    mae,
    mean_accuracy,
    mean_iou,
    metric_bundle,
    pixel_accuracy,
    read_image,
    read_mask,
    union_masks,
    write_mask,
)
from .prompts import (
    BoundingBox,
    DEFAULT_THRESHOLDS,
    GRID_FRACTIONS,
    HsvThresholds,
    PointPrompt,
    PromptSet,
    STRATEGIES,
    build_prompts,
    centroid_point,
    fire_color_mask,
    grid_points,
    negative_point,
)
from .protocol import PROTOCOL_VERSION, decode_mask, encode_mask
from . import _kernels


def kernel_implementation() -> str:
    """Name of the active kernel backend: ``"cython"`` or ``"python"``."""
    return _kernels.implementation


__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BackendSpec",
    "BenchReport",
    "BoundingBox",
    "BoxSource",
    "ConfusionCounts",
    "DatasetError",
    "DatasetManifest",
    "DEFAULT_THRESHOLDS",
    "EvalConfig",
    "EvalReport",
    "ExternalBackend",
    "GRID_FRACTIONS",
    "HsvThresholdBackend",
    "HsvThresholds",
    "ManifestEntry",
    "MaskShapeError",
    "MetricBundle",
    "OracleBackend",
    "PointPrompt",
    "PromptError",
    "PromptSet",
    "PromptsegError",
    "PROTOCOL_VERSION",
    "ProtocolError",
    "SegmentResponse",
    "STRATEGIES",
    "VideoProfile",
    "VideoSequence",
    "binarize",
    "build_prompts",
    "centroid_point",
    "confusion_counts",
    "decode_mask",
    "detect",
    "dice",
    "emit_report",
    "encode_mask",
    "evaluate",
    "fire_color_mask",
    "fw_iou",
    "grid_points",
    "gt_boxes",
    "kernel_implementation",
    "label_components",
    "load_manifest",
    "load_video",
    "mae",
    "make_backend",
    "mean_accuracy",
    "mean_iou",
    "metric_bundle",
    "negative_point",
    "pair_by_stem",
    "pixel_accuracy",
    "profile_video",
    "read_image",
    "read_mask",
    "render_overlay",
    "segment",
    "union_masks",
    "write_manifest",
    "write_mask",
]
