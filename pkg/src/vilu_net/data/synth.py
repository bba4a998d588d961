"""Seeded synthetic CT-like segmentation cases."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.errors import GenerationError, ValidationError
from ..core.validate import ensure_positive, ensure_positive_int, ensure_probability
from ..utils.logging import get_logger
from .manifest import IMAGE_DIR, LABEL_DIR, ManifestEntry, assign_split, write_manifest
from .nrrd import write_nrrd
from .types import LabelMap, Sample, Volume

log = get_logger("data.synth")

BACKGROUND_MEAN = -50.0
BACKGROUND_STD = 30.0
FOREGROUND_MEAN = 60.0
FOREGROUND_STD = 20.0
CLASS_MEAN_STEP = 50.0
MIN_BLOB_EXTENT = 4


@dataclass(frozen=True)
class SynthConfig:
    """
    Generator settings.

    Class ``k >= 1`` has intensities ``N(60 + 50 (k - 1), 20)`` HU over a
    ``N(-50, 30)`` background. ``foreground_fraction`` bounds the share of
    non-background voxels per case; a case is redrawn up to ``max_attempts`` times
    until it falls inside.
    """

    shape: tuple[int, ...] = (64, 64)
    num_classes: int = 2
    spacing: tuple[float, ...] | None = None
    foreground_fraction: tuple[float, float] = (0.05, 0.4)
    blobs_per_class: tuple[int, int] = (1, 2)
    max_attempts: int = 100
    val_fraction: float = 0.2

    def __post_init__(self) -> None:
        if len(self.shape) not in (2, 3):
            raise ValidationError(f"shape must be 2-d or 3-d; got {self.shape}.")
        for axis, n in enumerate(self.shape):
            ensure_positive_int(n, f"shape[{axis}]")
        if isinstance(self.num_classes, bool) or not isinstance(self.num_classes, int):
            raise ValidationError(f"num_classes must be an integer; got {self.num_classes!r}.")
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2; got {self.num_classes}.")
        if self.spacing is not None:
            if len(self.spacing) != len(self.shape):
                raise ValidationError(f"spacing {self.spacing} does not match shape {self.shape}.")
            for axis, s in enumerate(self.spacing):
                ensure_positive(s, f"spacing[{axis}]")
        low, high = self.foreground_fraction
        ensure_probability(low, "foreground_fraction[0]", inclusive=True)
        ensure_probability(high, "foreground_fraction[1]", inclusive=True)
        if low > high:
            raise ValidationError(f"foreground_fraction {self.foreground_fraction} is empty.")
        lo_blobs, hi_blobs = self.blobs_per_class
        ensure_positive_int(lo_blobs, "blobs_per_class[0]")
        ensure_positive_int(hi_blobs, "blobs_per_class[1]")
        if lo_blobs > hi_blobs:
            raise ValidationError(f"blobs_per_class {self.blobs_per_class} is empty.")
        ensure_positive_int(self.max_attempts, "max_attempts")
        ensure_probability(self.val_fraction, "val_fraction", inclusive=True)

    @property
    def voxel_spacing(self) -> tuple[float, ...]:
        return self.spacing or (1.0,) * len(self.shape)


def class_mean(label: int) -> float:
    return FOREGROUND_MEAN + CLASS_MEAN_STEP * (label - 1)


def _blob(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """One ellipsoid or box, fully inside the grid."""
    # 2 r < n leaves at least one admissible centre per axis
    radii = [
        int(rng.integers(max(1, n // 10), min(max(2, (3 * n) // 10), (n - 1) // 2) + 1))
        for n in shape
    ]
    centre = [int(rng.integers(r, n - r)) for r, n in zip(radii, shape, strict=True)]
    grids = np.ogrid[tuple(slice(0, n) for n in shape)]
    if rng.random() < 0.5:
        dist = sum(((g - c) / r) ** 2 for g, c, r in zip(grids, centre, radii, strict=True))
        return np.asarray(dist <= 1.0)
    inside = np.ones(shape, dtype=bool)
    for g, c, r in zip(grids, centre, radii, strict=True):
        inside &= np.abs(g - c) <= r
    return inside


def _draw_labels(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    labels = np.zeros(cfg.shape, dtype=np.int64)
    lo, hi = cfg.blobs_per_class
    for label in range(1, cfg.num_classes):
        for _ in range(int(rng.integers(lo, hi + 1))):
            labels[_blob(rng, cfg.shape)] = label
    return labels


def synth_case(rng: np.random.Generator, cfg: SynthConfig, case_id: str) -> Sample:
    if min(cfg.shape) < MIN_BLOB_EXTENT:
        raise GenerationError(
            f"shape {cfg.shape} is too small for blobs (every extent must be >= "
            f"{MIN_BLOB_EXTENT})."
        )
    low, high = cfg.foreground_fraction
    for _ in range(cfg.max_attempts):
        try:
            labels = _draw_labels(rng, cfg)
        except ValueError as exc:
            raise GenerationError(f"{case_id}: cannot place blobs in {cfg.shape}: {exc}") from exc
        fraction = float(np.mean(labels > 0))
        present = len(np.unique(labels)) == cfg.num_classes
        if low <= fraction <= high and present:
            break
    else:
        raise GenerationError(
            f"{case_id}: no blob layout with foreground fraction in [{low}, {high}] after "
            f"{cfg.max_attempts} attempts."
        )
    image = rng.normal(BACKGROUND_MEAN, BACKGROUND_STD, size=cfg.shape)
    for label in range(1, cfg.num_classes):
        mask = labels == label
        image[mask] = rng.normal(class_mean(label), FOREGROUND_STD, size=int(mask.sum()))
    spacing = cfg.voxel_spacing
    return Sample(
        image=Volume(data=image.astype(np.float32), spacing=spacing, storage_type="float"),
        label=LabelMap(
            data=labels, num_classes=cfg.num_classes, spacing=spacing, storage_type="uchar"
        ),
        case_id=case_id,
        split=assign_split(case_id, cfg.val_fraction),
        meta={"foreground_fraction": fraction},
    )


def synth_dataset(
    seed: int,
    n_cases: int,
    shape: tuple[int, ...] = (64, 64),
    num_classes: int = 2,
    *,
    config: SynthConfig | None = None,
) -> list[Sample]:
    """
    Generate ``n_cases`` cases from one seeded stream.

    Cases are drawn sequentially from ``numpy.random.default_rng(seed)``, so equal
    arguments give bit-identical data.
    """
    ensure_positive_int(n_cases, "n_cases")
    cfg = config or SynthConfig(shape=tuple(shape), num_classes=num_classes)
    rng = np.random.default_rng(seed)
    samples = [synth_case(rng, cfg, f"case_{index:03d}") for index in range(n_cases)]
    log.info("Generated %d synthetic cases of shape %s (seed %d)", n_cases, cfg.shape, seed)
    return samples


def write_dataset(
    samples: list[Sample], out_dir: str | Path, *, encoding: str = "raw"
) -> Path:
    """Write ``images/<case>.nrrd``, ``labels/<case>.nrrd`` and the manifest."""
    out_dir = Path(out_dir)
    entries = []
    for sample in samples:
        image_rel = f"{IMAGE_DIR}/{sample.case_id}.nrrd"
        label_rel = f"{LABEL_DIR}/{sample.case_id}.nrrd"
        write_nrrd(out_dir / image_rel, sample.image, encoding=encoding)
        write_nrrd(out_dir / label_rel, sample.label, encoding=encoding)
        entries.append(ManifestEntry(sample.case_id, image_rel, label_rel, sample.split))
    return write_manifest(entries, out_dir)


__all__ = [
    "BACKGROUND_MEAN",
    "BACKGROUND_STD",
    "FOREGROUND_MEAN",
    "FOREGROUND_STD",
    "SynthConfig",
    "class_mean",
    "synth_case",
    "synth_dataset",
    "write_dataset",
]
