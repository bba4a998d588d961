"""Volumes, label maps and paired samples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.errors import DimensionError, LabelError, ValidationError
from ..core.validate import ensure_finite, ensure_positive, ensure_positive_int
from ..utils.types import Split

SPLITS: tuple[Split, ...] = ("train", "val", "test")


def _check_geometry(
    shape: tuple[int, ...], spacing: tuple[float, ...], origin: tuple[float, ...], what: str
) -> None:
    if len(shape) not in (2, 3):
        raise DimensionError(f"{what} must be 2-d or 3-d; got shape {shape}.")
    if len(spacing) != len(shape) or len(origin) != len(shape):
        raise DimensionError(
            f"{what} shape {shape} needs one spacing and origin entry per axis; "
            f"got spacing {spacing} and origin {origin}."
        )
    for axis, value in enumerate(spacing):
        ensure_positive(value, f"{what} spacing[{axis}]")


@dataclass(frozen=True)
class Volume:
    """
    Scalar image grid with physical geometry.

    ``orientation`` holds one sign per axis (``+1`` or ``-1``): the sign of the
    diagonal direction vector the axis was stored with. ``storage_type`` records the
    on-disk element type so raw files round-trip byte for byte, and ``content`` the
    free-text NRRD ``content`` field.
    """

    data: np.ndarray
    spacing: tuple[float, ...]
    origin: tuple[float, ...] = ()
    orientation: tuple[int, ...] = ()
    storage_type: str | None = None
    content: str | None = None

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float32)
        object.__setattr__(self, "data", data)
        rank = data.ndim
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        origin = tuple(float(o) for o in self.origin) or (0.0,) * rank
        object.__setattr__(self, "origin", origin)
        orientation = tuple(int(o) for o in self.orientation) or (1,) * rank
        object.__setattr__(self, "orientation", orientation)
        _check_geometry(data.shape, self.spacing, self.origin, "Volume")
        if any(o not in (1, -1) for o in self.orientation) or len(self.orientation) != rank:
            raise DimensionError(
                f"orientation must hold one +-1 per axis; got {self.orientation}."
            )
        ensure_finite(data, "Volume data")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)


@dataclass(frozen=True)
class LabelMap:
    """Integer class grid; every value lies in ``[0, num_classes)``."""

    data: np.ndarray
    num_classes: int
    spacing: tuple[float, ...]
    origin: tuple[float, ...] = ()
    orientation: tuple[int, ...] = ()
    storage_type: str | None = None
    content: str | None = None

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.integer):
            if not np.all(np.equal(np.mod(data, 1), 0)):
                raise LabelError("label map holds non-integer values.")
            data = data.astype(np.int64)
        object.__setattr__(self, "data", data)
        ensure_positive_int(self.num_classes, "num_classes")
        rank = data.ndim
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        origin = tuple(float(o) for o in self.origin) or (0.0,) * rank
        object.__setattr__(self, "origin", origin)
        orientation = tuple(int(o) for o in self.orientation) or (1,) * rank
        object.__setattr__(self, "orientation", orientation)
        _check_geometry(data.shape, self.spacing, self.origin, "LabelMap")
        if data.size:
            low, high = int(data.min()), int(data.max())
            if low < 0 or high >= self.num_classes:
                bad = low if low < 0 else high
                raise LabelError(
                    f"label value {bad} is outside the class range [0, {self.num_classes})."
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


@dataclass(frozen=True)
class Sample:
    """An image with its aligned label map."""

    image: Volume
    label: LabelMap
    case_id: str
    split: Split = "train"
    meta: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValidationError(f"split must be one of {SPLITS}; got {self.split!r}.")
        if self.image.shape != self.label.shape:
            raise DimensionError(
                f"case {self.case_id}: image shape {self.image.shape} does not match "
                f"label shape {self.label.shape}."
            )
        if not np.allclose(self.image.spacing, self.label.spacing):
            raise DimensionError(
                f"case {self.case_id}: image spacing {self.image.spacing} does not match "
                f"label spacing {self.label.spacing}."
            )


__all__ = ["SPLITS", "LabelMap", "Sample", "Volume"]
