"""Pseudo ground-truth generation for weakly supervised indoor scene parsing.

Depth-based teacher predictions and class activation maps are fused over
contour segments into partial label maps, with the depth-domain adaptation
losses, segmentation losses and coverage-aware metrics around them.
"""

from .contours import SegmentMap, extract_segments, segment_histogram
from .core import CLASS_NAMES, NUM_CLASSES, UNKNOWN, DepthMap, decode_tensor, encode_tensor
from .evaluation import (
    ConfusionMatrix,
    MetricReport,
    confusion,
    cover_ratio,
    coverage_summary,
    effective_metrics,
    metrics,
    restricted_metrics,
    ucm_refine,
)
from .fusion import (
    CategoryGroups,
    ThresholdProfile,
    cam_area,
    confidence_filter,
    generate_pseudo_labels,
    response_stats,
    step1_vote,
    step2_integrate,
)
from .losses import class_balance_weights, weighted_nll
from .weak_local import HeadWeights, compute_cam, head_forward

__version__ = "0.1.0"

__all__ = [
    "SegmentMap",
    "extract_segments",
    "segment_histogram",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "UNKNOWN",
    "DepthMap",
    "decode_tensor",
    "encode_tensor",
    "ConfusionMatrix",
    "MetricReport",
    "confusion",
    "cover_ratio",
    "coverage_summary",
    "effective_metrics",
    "metrics",
    "restricted_metrics",
    "ucm_refine",
    "CategoryGroups",
    "ThresholdProfile",
    "cam_area",
    "confidence_filter",
    "generate_pseudo_labels",
    "response_stats",
    "step1_vote",
    "step2_integrate",
    "class_balance_weights",
    "weighted_nll",
    "HeadWeights",
    "compute_cam",
    "head_forward",
]
