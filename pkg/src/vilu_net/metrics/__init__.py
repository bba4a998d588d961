"""Training loss and segmentation metrics."""

from .losses import DICE_EPS, check_labels, combined_loss, cross_entropy, soft_dice_loss
from .overlap import dsc_iou
from .report import (
    CSV_COLUMNS,
    ClassMetrics,
    MetricsReport,
    aggregate_frame,
    class_metrics,
    evaluate_case,
    grid_diagonal,
    write_aggregate_csv,
)
from .surface import SurfaceDistances, directed_distances, hausdorff, nsd, surface_extract

__all__ = [
    "CSV_COLUMNS",
    "DICE_EPS",
    "ClassMetrics",
    "MetricsReport",
    "SurfaceDistances",
    "aggregate_frame",
    "check_labels",
    "class_metrics",
    "combined_loss",
    "cross_entropy",
    "directed_distances",
    "dsc_iou",
    "evaluate_case",
    "grid_diagonal",
    "hausdorff",
    "nsd",
    "soft_dice_loss",
    "surface_extract",
    "write_aggregate_csv",
]
