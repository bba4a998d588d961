"""Training objective: soft Dice plus cross-entropy with unit weights."""

from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..core.errors import DimensionError, LabelError

DICE_EPS = 1e-5


def check_labels(target: np.ndarray, num_classes: int) -> np.ndarray:
    """Return ``target`` as an integer array, rejecting class indices outside ``[0, K)``."""
    labels = np.asarray(target)
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise LabelError("label map must hold integer class indices.")
        labels = labels.astype(np.int64)
    bad = labels[(labels < 0) | (labels >= num_classes)]
    if bad.size:
        raise LabelError(
            f"label value {int(bad.flat[0])} is outside the class range [0, {num_classes})."
        )
    return labels


def one_hot(labels: np.ndarray, num_classes: int, dtype: np.dtype) -> np.ndarray:
    """``(B, *spatial) -> (B, K, *spatial)``."""
    encoded = np.eye(num_classes, dtype=dtype)[labels]
    return np.moveaxis(encoded, -1, 1)


def cross_entropy(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean over voxels of ``-log softmax(logits)[true class]``."""
    hot = one_hot(check_labels(target, logits.shape[1]), logits.shape[1], logits.dtype)
    voxels = hot.size // logits.shape[1]
    return -ops.sum(ops.log_softmax(logits, axis=1) * hot) * (1.0 / voxels)


def soft_dice_loss(logits: Tensor, target: np.ndarray, eps: float = DICE_EPS) -> Tensor:
    """``1 - mean_k (2 sum p g + eps) / (sum p + sum g + eps)``, sums over batch and space."""
    classes = logits.shape[1]
    hot = one_hot(check_labels(target, classes), classes, logits.dtype)
    probs = ops.softmax(logits, axis=1)
    axes = (0, *range(2, logits.ndim))
    intersection = ops.sum(probs * hot, axis=axes)
    denominator = ops.sum(probs, axis=axes) + hot.sum(axis=axes)
    dice = (intersection * 2.0 + eps) / (denominator + eps)
    return 1.0 - ops.mean(dice)


def combined_loss(logits: Tensor, target: np.ndarray) -> Tensor:
    """
    Dice loss plus cross-entropy, each with weight 1.

    Parameters
    ----------
    logits:
        ``(B, K, *spatial)`` raw network outputs.
    target:
        ``(B, *spatial)`` integer class indices in ``[0, K)``.
    """
    labels = np.asarray(target)
    expected = (logits.shape[0], *logits.shape[2:])
    if labels.shape != expected:
        raise DimensionError(
            f"target shape {labels.shape} does not match logits {logits.shape}; "
            f"expected {expected}."
        )
    return soft_dice_loss(logits, labels) + cross_entropy(logits, labels)


__all__ = [
    "DICE_EPS",
    "check_labels",
    "combined_loss",
    "cross_entropy",
    "one_hot",
    "soft_dice_loss",
]
