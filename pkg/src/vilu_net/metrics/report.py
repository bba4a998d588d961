"""Per-case metric reports and their JSON/CSV serialization."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..core.errors import DimensionError
from ..core.validate import ensure_positive, ensure_positive_int, ensure_same_shape
from ..utils.logging import get_logger
from ..utils.workers import max_workers
from .overlap import dsc_iou
from .surface import CONNECTIVITY, hausdorff, nsd, surface_extract

log = get_logger("metrics.report")

METRICS = ("dsc", "iou", "nsd", "hd", "hd95")
CSV_COLUMNS = ["case_id", "class", *METRICS]


@dataclass(frozen=True)
class ClassMetrics:
    dsc: float
    iou: float
    nsd: float
    hd: float
    hd95: float
    hd_defined: bool = True


@dataclass(frozen=True)
class MetricsReport:
    """
    Overlap and surface metrics of one case, keyed by foreground class index.

    Undefined Hausdorff values (one surface empty) are stored as the physical
    diagonal of the grid, with ``hd_defined`` false. Both-empty classes score
    DSC, IoU and NSD of 1.0 and distances of 0.
    """

    case_id: str
    per_class: dict[int, ClassMetrics]
    nsd_tolerance_mm: float
    spacing: tuple[float, ...]
    connectivity: str = CONNECTIVITY
    conventions: dict[str, str] = field(
        default_factory=lambda: {
            "both_empty": "dsc=iou=nsd=1, hd=hd95=0",
            "one_empty_hd": "grid diagonal (mm)",
            "hd95": "max of directed 95th percentiles",
        }
    )

    @property
    def mean(self) -> dict[str, float]:
        """Mean of each metric over foreground classes."""
        if not self.per_class:
            return {name: float("nan") for name in METRICS}
        return {
            name: float(np.mean([getattr(m, name) for m in self.per_class.values()]))
            for name in METRICS
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "per_class": {str(k): asdict(v) for k, v in sorted(self.per_class.items())},
            "mean": self.mean,
            "nsd_tolerance_mm": self.nsd_tolerance_mm,
            "spacing": list(self.spacing),
            "connectivity": self.connectivity,
            "conventions": dict(self.conventions),
        }

    def rows(self) -> list[dict[str, Any]]:
        return [
            {"case_id": self.case_id, "class": k, **{n: getattr(m, n) for n in METRICS}}
            for k, m in sorted(self.per_class.items())
        ]

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
        return path


def grid_diagonal(shape: Sequence[int], spacing: Sequence[float]) -> float:
    return math.sqrt(sum((n * s) ** 2 for n, s in zip(shape, spacing, strict=True)))


def class_metrics(
    pred: np.ndarray,
    ref: np.ndarray,
    label: int,
    spacing: Sequence[float],
    tolerance_mm: float = 1.0,
) -> ClassMetrics:
    dsc, iou = dsc_iou(pred, ref, label)
    pred_surface = surface_extract(pred == label)
    ref_surface = surface_extract(ref == label)
    distances = hausdorff(pred_surface, ref_surface, spacing)
    hd, hd95 = distances.hd, distances.hd95
    if not distances.defined:
        hd = hd95 = grid_diagonal(pred.shape, spacing)
    return ClassMetrics(
        dsc=dsc,
        iou=iou,
        nsd=nsd(pred_surface, ref_surface, spacing, tolerance_mm),
        hd=hd,
        hd95=hd95,
        hd_defined=distances.defined,
    )


def evaluate_case(
    pred: np.ndarray,
    ref: np.ndarray,
    spacing: Sequence[float],
    num_classes: int,
    *,
    tolerance_mm: float = 1.0,
    case_id: str = "case",
) -> MetricsReport:
    """Score every foreground class ``1 .. num_classes-1`` of one case."""
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    ensure_same_shape(pred.shape, ref.shape, f"case {case_id}")
    ensure_positive_int(num_classes, "num_classes")
    ensure_positive(tolerance_mm, "tolerance_mm")
    if len(spacing) != pred.ndim:
        raise DimensionError(f"spacing {tuple(spacing)} does not match label shape {pred.shape}.")
    labels = range(1, num_classes)
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        results = list(
            pool.map(lambda k: class_metrics(pred, ref, k, spacing, tolerance_mm), labels)
        )
    report = MetricsReport(
        case_id=case_id,
        per_class=dict(zip(labels, results, strict=True)),
        nsd_tolerance_mm=tolerance_mm,
        spacing=tuple(float(s) for s in spacing),
    )
    log.debug("case %s mean=%s", case_id, report.mean)
    return report


def aggregate_frame(reports: Iterable[MetricsReport]) -> pd.DataFrame:
    rows = [row for report in reports for row in report.rows()]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_aggregate_csv(reports: Iterable[MetricsReport], path: str | Path) -> pd.DataFrame:
    """One row per (case, class) with columns ``case_id, class, dsc, iou, nsd, hd, hd95``."""
    frame = aggregate_frame(reports)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return frame


__all__ = [
    "CSV_COLUMNS",
    "METRICS",
    "ClassMetrics",
    "MetricsReport",
    "aggregate_frame",
    "class_metrics",
    "evaluate_case",
    "grid_diagonal",
    "write_aggregate_csv",
]
