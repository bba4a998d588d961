"""Voxel-overlap scores between a predicted and a reference label map."""

from __future__ import annotations

import numpy as np

from ..core.validate import ensure_same_shape


def dsc_iou(pred: np.ndarray, ref: np.ndarray, label: int) -> tuple[float, float]:
    """Dice and Jaccard overlap of class ``label``; both masks empty scores ``(1.0, 1.0)``."""
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    ensure_same_shape(pred.shape, ref.shape, "dsc_iou")
    a = pred == label
    b = ref == label
    size_a = int(a.sum())
    size_b = int(b.sum())
    if size_a + size_b == 0:
        return 1.0, 1.0
    overlap = int(np.logical_and(a, b).sum())
    union = size_a + size_b - overlap
    return 2.0 * overlap / (size_a + size_b), overlap / union


__all__ = ["dsc_iou"]
