"""Bounding-box similarity metrics and label assignment for tiny objects.

Core pieces:

* :mod:`tinymatch.geometry` — box types, conversions, box-to-Gaussian model.
* :mod:`tinymatch.metrics` — IoU family, Gaussian Wasserstein distance and
  its normalized form (NWD), scalar and matrix variants.
* :mod:`tinymatch.assignment` — anchor generation, the classic two-threshold
  assigner with sample compensation, and ranking-based assignment (RKA).
* :mod:`tinymatch.diagnostics` — deviation curves and per-scale statistics.
* :mod:`tinymatch.evaluation` — NMS, score filtering, stratified AP/AR.
* :mod:`tinymatch.dataio` — COCO annotation parsing, synthetic scenes, CSV.

The pairwise kernels run on a compiled extension when available and fall
back to pure Python otherwise; ``tinymatch.kernel_backend()`` reports which
one is active.
"""

from ._kernels import backend_name as kernel_backend
from .assignment import (
    IGNORE,
    NEGATIVE,
    AnchorConfig,
    AssignerConfig,
    AssignmentResult,
    Strategy,
    assign,
    assign_rka,
    assign_threshold,
    generate_anchors,
    sample,
)
from .dataio import (
    AnnotationSet,
    DatasetStats,
    compute_stats,
    export_csv,
    load_annotations,
    save_annotations,
    synth_scene,
)
from .diagnostics import (
    DeviationCurve,
    ScaleBucket,
    deviation_curve,
    per_gt_positive_stats,
    pos_neg_totals,
)
from .errors import (
    AnnotationError,
    InvalidBoxError,
    InvalidConfigError,
    InvalidInputError,
    InvalidParameterError,
    TinymatchError,
)
from .evaluation import (
    Detection,
    EvalReport,
    average_precision,
    evaluate,
    load_detections,
    match,
    nms,
    score_filter,
)
from .geometry import (
    Box,
    BoxSet,
    GaussianBox,
    box_absolute_size,
    box_to_gaussian,
    center_to_corners,
    corners_to_center,
)
from .metrics import (
    DEFAULT_C,
    SIMPLE_C,
    MetricKind,
    MetricMatrix,
    ciou,
    diou,
    giou,
    gwd,
    iou,
    nwd,
    pairwise,
    wasserstein_sq,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "kernel_backend",
    # geometry
    "Box", "GaussianBox", "BoxSet", "box_to_gaussian", "corners_to_center",
    "center_to_corners", "box_absolute_size",
    # metrics
    "MetricKind", "MetricMatrix", "DEFAULT_C", "SIMPLE_C", "iou", "giou", "diou", "ciou",
    "wasserstein_sq", "gwd", "nwd", "pairwise",
    # assignment
    "Strategy", "AnchorConfig", "AssignerConfig", "AssignmentResult",
    "NEGATIVE", "IGNORE", "generate_anchors", "assign", "assign_threshold",
    "assign_rka", "sample",
    # diagnostics
    "ScaleBucket", "DeviationCurve", "deviation_curve",
    "per_gt_positive_stats", "pos_neg_totals",
    # evaluation
    "Detection", "EvalReport", "nms", "score_filter", "match",
    "average_precision", "evaluate", "load_detections",
    # data io
    "AnnotationSet", "DatasetStats", "load_annotations", "save_annotations",
    "compute_stats", "synth_scene", "export_csv",
    # errors
    "TinymatchError", "InvalidBoxError", "InvalidParameterError",
    "InvalidConfigError", "InvalidInputError", "AnnotationError",
]
