"""Reusable validation helpers built on custom error types."""

from __future__ import annotations

import math
import numbers
from collections.abc import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DimensionError, NumericError, ValidationError

__all__ = [
    "require_columns",
    "ensure_positive",
    "ensure_non_negative",
    "ensure_positive_int",
    "ensure_probability",
    "ensure_finite",
    "ensure_same_shape",
    "ensure_divisible",
]


def require_columns(
    df: pd.DataFrame,
    columns: Iterable[str],
    *,
    context: str = "DataFrame",
) -> None:
    """Ensure ``df`` contains all ``columns``."""
    missing = [col for col in columns if col not in df.columns]
    if missing:
        raise ValidationError(f"{context} missing required columns: {sorted(missing)}")


def ensure_positive(value: float | int, name: str) -> None:
    """Ensure a scalar is strictly positive."""
    if not value > 0:
        raise ValidationError(f"{name} must be positive; got {value}.")


def ensure_non_negative(value: float | int, name: str) -> None:
    """Ensure a scalar is zero or positive."""
    if value < 0:
        raise ValidationError(f"{name} must be non-negative; got {value}.")


def ensure_positive_int(value: int, name: str) -> None:
    """Ensure a scalar is a positive integer."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value <= 0:
        raise ValidationError(f"{name} must be a positive integer; got {value!r}.")


def ensure_probability(value: float, name: str, *, inclusive: bool = False) -> None:
    """Ensure a value lies inside the probability interval."""
    if inclusive:
        valid = 0.0 <= value <= 1.0
        bounds = "[0, 1]"
    else:
        valid = 0.0 < value < 1.0
        bounds = "(0, 1)"
    if not valid:
        raise ValidationError(f"{name} must lie in {bounds}.")


def ensure_finite(values: np.ndarray | float, name: str) -> None:
    """Raise :class:`NumericError` when ``values`` holds NaN or infinities."""
    if isinstance(values, float):
        ok = math.isfinite(values)
    else:
        ok = bool(np.all(np.isfinite(values)))
    if not ok:
        raise NumericError(f"{name} contains non-finite values.")


def ensure_same_shape(a: Sequence[int], b: Sequence[int], what: str) -> None:
    """Raise :class:`DimensionError` naming both shapes when they differ."""
    if tuple(a) != tuple(b):
        raise DimensionError(f"{what}: shape {tuple(a)} does not match {tuple(b)}.")


def ensure_divisible(extents: Sequence[int], factor: int, what: str) -> None:
    """Ensure every spatial extent is divisible by ``factor``."""
    for axis, extent in enumerate(extents):
        if extent % factor != 0:
            raise ConfigError(
                f"{what}: spatial extent {extent} on axis {axis} is not divisible by {factor}."
            )
