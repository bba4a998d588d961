"""Scoring trained networks and prediction directories."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..core.errors import DataError
from ..core.validate import ensure_positive
from ..data.manifest import LABEL_DIR
from ..data.nrrd import read_label_nrrd
from ..data.types import Sample
from ..metrics.overlap import dsc_iou
from ..metrics.report import METRICS, MetricsReport, aggregate_frame, evaluate_case
from ..utils.logging import get_logger
from ..utils.types import SegmentationPredictor

log = get_logger("train.evaluate")

AGGREGATE_NAME = "metrics.csv"
SUMMARY_NAME = "summary.json"


@dataclass(frozen=True)
class EvaluationSummary:
    """Per-case reports with their unweighted mean over cases."""

    reports: tuple[MetricsReport, ...]

    @property
    def frame(self) -> pd.DataFrame:
        return aggregate_frame(self.reports)

    @property
    def mean(self) -> dict[str, float]:
        if not self.reports:
            return {name: float("nan") for name in METRICS}
        return {
            name: float(np.mean([report.mean[name] for report in self.reports]))
            for name in METRICS
        }

    def write(self, out_dir: str | Path) -> Path:
        """``<case>.json`` per case, ``metrics.csv`` and ``summary.json`` under ``out_dir``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for report in self.reports:
            report.write_json(out_dir / f"{report.case_id}.json")
        self.frame.to_csv(out_dir / AGGREGATE_NAME, index=False)
        summary = {"cases": len(self.reports), "mean": self.mean}
        (out_dir / SUMMARY_NAME).write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        log.info("Wrote %d case reports to %s", len(self.reports), out_dir)
        return out_dir / AGGREGATE_NAME


def predict_sample(model: SegmentationPredictor, sample: Sample) -> np.ndarray:
    """Arg-max label map of one single-channel case."""
    return model.predict(sample.image.data[None, None])[0]


def foreground_dsc(pred: np.ndarray, ref: np.ndarray, num_classes: int) -> float:
    """Mean DSC over classes ``1 .. num_classes-1``."""
    return float(np.mean([dsc_iou(pred, ref, k)[0] for k in range(1, num_classes)]))


def mean_foreground_dsc(
    model: SegmentationPredictor, samples: Sequence[Sample], num_classes: int
) -> float:
    """Average of :func:`foreground_dsc` over ``samples``."""
    scores = [
        foreground_dsc(predict_sample(model, s), s.label.data, num_classes) for s in samples
    ]
    return float(np.mean(scores))


def evaluate(
    model: SegmentationPredictor,
    samples: Sequence[Sample],
    num_classes: int,
    *,
    tolerance_mm: float = 1.0,
) -> EvaluationSummary:
    """
    Predict every sample and score it against its reference label map.

    Parameters
    ----------
    model:
        Anything with ``predict(images) -> labels``, e.g. a :class:`ViLUNet`.
    num_classes:
        Classes of the network head; foreground classes ``1 .. num_classes-1`` are scored.
    tolerance_mm:
        NSD tolerance.
    """
    ensure_positive(tolerance_mm, "tolerance_mm")
    if not samples:
        raise DataError("no cases to evaluate.")
    reports = tuple(
        evaluate_case(
            predict_sample(model, sample),
            sample.label.data,
            sample.image.spacing,
            num_classes,
            tolerance_mm=tolerance_mm,
            case_id=sample.case_id,
        )
        for sample in samples
    )
    summary = EvaluationSummary(reports)
    log.info("Evaluated %d cases: mean %s", len(reports), summary.mean)
    return summary


def _label_files(directory: Path) -> dict[str, Path]:
    root = directory / LABEL_DIR if (directory / LABEL_DIR).is_dir() else directory
    return {path.stem: path for path in sorted(root.glob("*.nrrd"))}


def evaluate_directories(
    pred_dir: str | Path,
    ref_dir: str | Path,
    *,
    num_classes: int | None = None,
    tolerance_mm: float = 1.0,
) -> EvaluationSummary:
    """
    Score label NRRDs in ``pred_dir`` against those in ``ref_dir``, matched by file name.

    Either directory may hold the files directly or under ``labels/``. Every reference
    case needs a prediction. ``num_classes`` defaults to one more than the largest label
    found.
    """
    ensure_positive(tolerance_mm, "tolerance_mm")
    preds = _label_files(Path(pred_dir))
    refs = _label_files(Path(ref_dir))
    if not refs:
        raise DataError(f"no reference label maps in {ref_dir}.")
    missing = sorted(set(refs) - set(preds))
    if missing:
        raise DataError(f"{pred_dir} has no prediction for cases {missing}.")
    pairs = {
        case: (read_label_nrrd(preds[case]), read_label_nrrd(refs[case])) for case in refs
    }
    if num_classes is None:
        num_classes = max(max(p.num_classes, r.num_classes) for p, r in pairs.values())
    reports = tuple(
        evaluate_case(
            pred.data,
            ref.data,
            ref.spacing,
            num_classes,
            tolerance_mm=tolerance_mm,
            case_id=case,
        )
        for case, (pred, ref) in pairs.items()
    )
    return EvaluationSummary(reports)


__all__ = [
    "AGGREGATE_NAME",
    "EvaluationSummary",
    "evaluate",
    "evaluate_directories",
    "foreground_dsc",
    "mean_foreground_dsc",
    "predict_sample",
]
