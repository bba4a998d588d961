"""Dataset manifests: one JSON record per case with image/label paths and split."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import cast

import pandas as pd

from ..core.errors import ManifestError
from ..core.validate import ensure_probability, require_columns
from ..utils.logging import get_logger
from ..utils.types import Split
from ..utils.workers import max_workers
from .nrrd import read_nrrd
from .types import SPLITS, LabelMap, Sample, Volume

log = get_logger("data.manifest")

MANIFEST_NAME = "manifest.json"
MANIFEST_COLUMNS = ["case_id", "image_path", "label_path", "split"]
IMAGE_DIR = "images"
LABEL_DIR = "labels"


@dataclass(frozen=True)
class ManifestEntry:
    case_id: str
    image_path: str
    label_path: str
    split: Split = "train"


def assign_split(case_id: str, val_fraction: float = 0.2, test_fraction: float = 0.0) -> Split:
    """Deterministic split from the SHA-256 of ``case_id``."""
    ensure_probability(val_fraction, "val_fraction", inclusive=True)
    ensure_probability(test_fraction, "test_fraction", inclusive=True)
    if val_fraction + test_fraction > 1.0:
        raise ManifestError("val_fraction + test_fraction must not exceed 1.")
    digest = hashlib.sha256(case_id.encode("utf-8")).hexdigest()
    u = int(digest[:8], 16) / 2**32
    if u < test_fraction:
        return "test"
    if u < test_fraction + val_fraction:
        return "val"
    return "train"


def manifest_frame(entries: Iterable[ManifestEntry]) -> pd.DataFrame:
    return pd.DataFrame([asdict(e) for e in entries], columns=MANIFEST_COLUMNS)


def write_manifest(entries: Sequence[ManifestEntry], directory: str | Path) -> Path:
    """Write ``manifest.json``; entry paths are stored as given, relative to ``directory``."""
    directory = Path(directory)
    frame = manifest_frame(entries).sort_values("case_id", kind="stable")
    if frame["case_id"].duplicated().any():
        dupes = sorted(frame.loc[frame["case_id"].duplicated(), "case_id"])
        raise ManifestError(f"duplicate case ids in manifest: {dupes}")
    path = directory / MANIFEST_NAME
    directory.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(frame.to_dict(orient="records"), indent=2) + "\n", "utf-8")
    log.info("Wrote manifest %s (%d cases)", path, len(frame))
    return path


def read_manifest(path: str | Path) -> pd.DataFrame:
    """Load a manifest; ``image_path``/``label_path`` are resolved against its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        records = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"Cannot read manifest {path}: {exc}") from exc
    if not isinstance(records, list):
        raise ManifestError(f"{path}: manifest must be a JSON list of case records.")
    frame = pd.DataFrame.from_records(records)
    try:
        require_columns(frame, MANIFEST_COLUMNS, context=str(path))
    except ValueError as exc:
        raise ManifestError(str(exc)) from exc
    bad = sorted(set(frame["split"]) - set(SPLITS))
    if bad:
        raise ManifestError(f"{path}: unknown split values {bad}.")
    for column in ("image_path", "label_path"):
        frame[column] = [str(path.parent / p) for p in frame[column]]
    return frame[MANIFEST_COLUMNS]


def discover_cases(directory: str | Path) -> list[ManifestEntry]:
    """Pair ``images/<case>.nrrd`` with ``labels/<case>.nrrd`` when no manifest exists.

    Images without a label still appear (with an empty ``label_path``) so callers can
    report them as excluded.
    """
    directory = Path(directory)
    entries = []
    for image in sorted((directory / IMAGE_DIR).glob("*.nrrd")):
        label = directory / LABEL_DIR / image.name
        entries.append(
            ManifestEntry(
                case_id=image.stem,
                image_path=str(image),
                label_path=str(label) if label.exists() else "",
                split=assign_split(image.stem),
            )
        )
    return entries


def load_entries(directory: str | Path) -> list[ManifestEntry]:
    directory = Path(directory)
    if (directory / MANIFEST_NAME).exists():
        frame = read_manifest(directory / MANIFEST_NAME)
        return [ManifestEntry(**row) for row in frame.to_dict(orient="records")]
    return discover_cases(directory)


def load_sample(entry: ManifestEntry, num_classes: int | None = None) -> Sample:
    image = cast(Volume, read_nrrd(entry.image_path))
    label = cast(LabelMap, read_nrrd(entry.label_path, labels=True, num_classes=num_classes))
    return Sample(image=image, label=label, case_id=entry.case_id, split=entry.split)


def load_samples(
    manifest: str | Path,
    *,
    num_classes: int | None = None,
    splits: Sequence[Split] | None = None,
) -> list[Sample]:
    """Read every case of ``manifest`` (optionally restricted to ``splits``) in case order."""
    frame = read_manifest(manifest)
    if splits is not None:
        frame = frame[frame["split"].isin(list(splits))]
    entries = [ManifestEntry(**row) for row in frame.to_dict(orient="records")]
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        return list(pool.map(lambda e: load_sample(e, num_classes), entries))


__all__ = [
    "IMAGE_DIR",
    "LABEL_DIR",
    "MANIFEST_COLUMNS",
    "MANIFEST_NAME",
    "ManifestEntry",
    "assign_split",
    "discover_cases",
    "load_entries",
    "load_sample",
    "load_samples",
    "manifest_frame",
    "read_manifest",
    "write_manifest",
]
