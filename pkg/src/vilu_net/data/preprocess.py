"""CT preprocessing: orientation, intensity window, and voxel respacing."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import cast

import numpy as np
from scipy import ndimage

from ..core.errors import DataError, DimensionError, ResampleError, ValidationError
from ..core.validate import ensure_positive
from ..utils.logging import get_logger
from ..utils.workers import max_workers
from .manifest import IMAGE_DIR, LABEL_DIR, ManifestEntry, load_entries, write_manifest
from .nrrd import read_nrrd, write_nrrd
from .types import LabelMap, Volume

log = get_logger("data.preprocess")

CLIP_LOW = -125.0
CLIP_HIGH = 275.0
DEFAULT_SPACING = 1.0
EXCLUDED_NAME = "excluded.json"
NORMALIZED_CONTENT = "intensity-normalized"


def clip_normalize(volume: Volume, low: float = CLIP_LOW, high: float = CLIP_HIGH) -> Volume:
    """Clip to ``[low, high]`` and map that window linearly onto ``[0, 1]``."""
    if not high > low:
        raise ValidationError(f"clip window must satisfy low < high; got [{low}, {high}].")
    clipped = np.clip(volume.data.astype(np.float64), low, high)
    data = (clipped - low) / (high - low)
    return replace(
        volume,
        data=data.astype(volume.data.dtype),
        storage_type="float",
        content=NORMALIZED_CONTENT,
    )


def output_extents(
    shape: Sequence[int], spacing: Sequence[float], target: Sequence[float]
) -> tuple[int, ...]:
    """``floor(n * spacing / target + 0.5)`` per axis; an extent below 1 is an error."""
    extents = tuple(
        int(math.floor(n * s / t + 0.5)) for n, s, t in zip(shape, spacing, target, strict=True)
    )
    if any(n < 1 for n in extents):
        raise ResampleError(
            f"respacing {tuple(shape)} from {tuple(spacing)} to {tuple(target)} mm "
            f"gives degenerate extents {extents}."
        )
    return extents


def resample_array(
    data: np.ndarray,
    spacing: Sequence[float],
    target: Sequence[float],
    *,
    order: int = 1,
) -> np.ndarray:
    """
    Resample a grid of any rank to ``target`` spacing at voxel centres.

    Output voxel ``i`` samples input coordinate ``(i + 0.5) * target / spacing - 0.5``;
    ``order`` 1 is (multi)linear interpolation and 0 nearest neighbour. Samples
    outside the grid take the nearest edge value.
    """
    data = np.asarray(data)
    if len(spacing) != data.ndim or len(target) != data.ndim:
        raise DimensionError(
            f"spacing {tuple(spacing)} / target {tuple(target)} do not match shape {data.shape}."
        )
    for axis, value in enumerate(target):
        if not (math.isfinite(value) and value > 0):
            raise ResampleError(f"target spacing[{axis}] must be positive; got {value}.")
    extents = output_extents(data.shape, spacing, target)
    if extents == data.shape and tuple(map(float, spacing)) == tuple(map(float, target)):
        return data.copy()
    axes = [
        (np.arange(m, dtype=np.float64) + 0.5) * (t / s) - 0.5
        for m, s, t in zip(extents, spacing, target, strict=True)
    ]
    coords = np.meshgrid(*axes, indexing="ij")
    out = ndimage.map_coordinates(data, coords, order=order, mode="nearest")
    log.debug("resampled %s -> %s (order %d)", data.shape, extents, order)
    return out


def _shifted_origin(
    origin: Sequence[float],
    orientation: Sequence[int],
    spacing: Sequence[float],
    target: Sequence[float],
) -> tuple[float, ...]:
    # the corner of the grid stays fixed, so the first voxel centre moves by (t - s) / 2
    return tuple(
        o + d * (t - s) / 2.0
        for o, d, s, t in zip(origin, orientation, spacing, target, strict=True)
    )


def _target(
    volume: Volume | LabelMap, target_spacing: float | Sequence[float]
) -> tuple[float, ...]:
    if isinstance(target_spacing, int | float):
        return (float(target_spacing),) * volume.data.ndim
    return tuple(float(t) for t in target_spacing)


def respace(volume: Volume, target_spacing: float | Sequence[float]) -> Volume:
    """Linear resampling of an image to ``target_spacing`` mm."""
    target = _target(volume, target_spacing)
    data = resample_array(volume.data, volume.spacing, target, order=1)
    return replace(
        volume,
        data=data.astype(volume.data.dtype),
        spacing=target,
        origin=_shifted_origin(volume.origin, volume.orientation, volume.spacing, target),
    )


def respace_labels(labels: LabelMap, target_spacing: float | Sequence[float]) -> LabelMap:
    """Nearest-neighbour resampling, so every output value is an input class."""
    target = _target(labels, target_spacing)
    data = resample_array(labels.data, labels.spacing, target, order=0)
    return replace(
        labels,
        data=data,
        spacing=target,
        origin=_shifted_origin(labels.origin, labels.orientation, labels.spacing, target),
    )


def canonicalize_orientation(image: Volume | LabelMap) -> Volume | LabelMap:
    """Flip axes stored with a negative direction so every axis points along ``+``."""
    flip_axes = tuple(axis for axis, sign in enumerate(image.orientation) if sign < 0)
    if not flip_axes:
        return image
    origin = tuple(
        o - (n - 1) * s if sign < 0 else o
        for o, n, s, sign in zip(
            image.origin, image.data.shape, image.spacing, image.orientation, strict=True
        )
    )
    return replace(
        image,
        data=np.ascontiguousarray(np.flip(image.data, flip_axes)),
        origin=origin,
        orientation=(1,) * image.data.ndim,
    )


def preprocess_case(
    image: Volume,
    labels: LabelMap,
    target_spacing: float | Sequence[float] = DEFAULT_SPACING,
    *,
    clip: tuple[float, float] = (CLIP_LOW, CLIP_HIGH),
) -> tuple[Volume, LabelMap]:
    """Orientation, then clip and normalize, then respace (labels follow the image grid).

    Images already marked as normalized keep their intensities, so running the
    pipeline on its own output only resamples.
    """
    if image.shape != labels.shape or not np.allclose(image.spacing, labels.spacing):
        raise DataError(
            f"image {image.shape} @ {image.spacing} and label {labels.shape} @ "
            f"{labels.spacing} are misaligned."
        )
    if tuple(image.orientation) != tuple(labels.orientation):
        raise DataError(
            f"image orientation {image.orientation} differs from label {labels.orientation}."
        )
    image = cast(Volume, canonicalize_orientation(image))
    labels = cast(LabelMap, canonicalize_orientation(labels))
    if image.content != NORMALIZED_CONTENT:
        image = clip_normalize(image, *clip)
    image = respace(image, target_spacing)
    return image, respace_labels(labels, target_spacing)


@dataclass(frozen=True)
class Exclusion:
    case_id: str
    reason: str


@dataclass(frozen=True)
class PreprocessResult:
    entries: tuple[ManifestEntry, ...]
    excluded: tuple[Exclusion, ...]
    manifest_path: Path


def _process_entry(
    entry: ManifestEntry,
    out_dir: Path,
    target_spacing: float | Sequence[float],
    clip: tuple[float, float],
) -> ManifestEntry | Exclusion:
    if not entry.label_path or not Path(entry.label_path).is_file():
        return Exclusion(entry.case_id, "missing label map")
    try:
        image = cast(Volume, read_nrrd(entry.image_path))
        labels = cast(LabelMap, read_nrrd(entry.label_path, labels=True))
        image, labels = preprocess_case(image, labels, target_spacing, clip=clip)
    except (DataError, DimensionError) as exc:
        return Exclusion(entry.case_id, str(exc))
    image_rel = f"{IMAGE_DIR}/{entry.case_id}.nrrd"
    label_rel = f"{LABEL_DIR}/{entry.case_id}.nrrd"
    write_nrrd(out_dir / image_rel, image, storage_type="float")
    write_nrrd(out_dir / label_rel, labels)
    return ManifestEntry(entry.case_id, image_rel, label_rel, entry.split)


def preprocess_directory(
    in_dir: str | Path,
    out_dir: str | Path,
    target_spacing: float | Sequence[float] = DEFAULT_SPACING,
    *,
    clip: tuple[float, float] = (CLIP_LOW, CLIP_HIGH),
) -> PreprocessResult:
    """
    Preprocess every case of ``in_dir`` (its manifest, or ``images/``+``labels/``).

    Cases that fail to parse, lack a label or are misaligned are skipped, logged and
    listed in ``excluded.json``; a :class:`DataError` is raised only when no case
    survives.
    """
    ensure_positive(min(np.atleast_1d(target_spacing)), "target_spacing")
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    entries = load_entries(in_dir)
    if not entries:
        raise DataError(f"no cases found in {in_dir}.")
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        results = list(
            pool.map(lambda e: _process_entry(e, out_dir, target_spacing, clip), entries)
        )
    kept = tuple(r for r in results if isinstance(r, ManifestEntry))
    excluded = tuple(r for r in results if isinstance(r, Exclusion))
    for item in excluded:
        log.warning("Excluded case %s: %s", item.case_id, item.reason)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / EXCLUDED_NAME).write_text(
        json.dumps([{"case_id": e.case_id, "reason": e.reason} for e in excluded], indent=2)
        + "\n",
        "utf-8",
    )
    if not kept:
        raise DataError(f"every case in {in_dir} was excluded; see {out_dir / EXCLUDED_NAME}.")
    manifest = write_manifest(kept, out_dir)
    log.info("Preprocessed %d cases (%d excluded) into %s", len(kept), len(excluded), out_dir)
    return PreprocessResult(entries=kept, excluded=excluded, manifest_path=manifest)


__all__ = [
    "CLIP_HIGH",
    "CLIP_LOW",
    "DEFAULT_SPACING",
    "EXCLUDED_NAME",
    "Exclusion",
    "NORMALIZED_CONTENT",
    "PreprocessResult",
    "canonicalize_orientation",
    "clip_normalize",
    "output_extents",
    "preprocess_case",
    "preprocess_directory",
    "resample_array",
    "respace",
    "respace_labels",
]
