"""Tests for dataset manifests and case discovery."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from vilu_net.core.errors import ManifestError, ValidationError
from vilu_net.data.manifest import (
    MANIFEST_NAME,
    ManifestEntry,
    assign_split,
    discover_cases,
    load_entries,
    load_samples,
    read_manifest,
    write_manifest,
)
from vilu_net.data.nrrd import write_nrrd
from vilu_net.data.types import LabelMap, Volume


def _write_case(root: Path, case_id: str, seed: int, *, label: bool = True) -> None:
    rng = np.random.default_rng(seed)
    write_nrrd(
        root / "images" / f"{case_id}.nrrd",
        Volume(data=rng.normal(size=(6, 5)).astype(np.float32), spacing=(1.0, 2.0)),
    )
    if label:
        write_nrrd(
            root / "labels" / f"{case_id}.nrrd",
            LabelMap(data=rng.integers(0, 3, size=(6, 5)), num_classes=3, spacing=(1.0, 2.0)),
        )


def test_assign_split_is_deterministic() -> None:
    """The split depends on the case id alone."""
    ids = [f"case_{i:03d}" for i in range(50)]
    assert [assign_split(c) for c in ids] == [assign_split(c) for c in ids]


def test_assign_split_fractions_are_roughly_respected() -> None:
    """Hash-based splitting tracks the requested fractions over many ids."""
    splits = [assign_split(f"case_{i:05d}", 0.2, 0.1) for i in range(4000)]
    assert abs(splits.count("val") / 4000 - 0.2) < 0.03
    assert abs(splits.count("test") / 4000 - 0.1) < 0.03


@pytest.mark.parametrize(("val", "test", "expected"), [(0.0, 0.0, "train"), (1.0, 0.0, "val")])
def test_assign_split_extremes(val: float, test: float, expected: str) -> None:
    """Zero and full fractions send every case to a single split."""
    assert {assign_split(f"c{i}", val, test) for i in range(100)} == {expected}


def test_assign_split_rejects_overfull_fractions() -> None:
    """val + test beyond 1 leaves no room for training."""
    with pytest.raises(ManifestError, match="must not exceed 1"):
        assign_split("c", 0.7, 0.5)


def test_write_then_read_resolves_paths(tmp_path: Path) -> None:
    """Paths are stored relative and resolved against the manifest directory."""
    entries = [
        ManifestEntry("b", "images/b.nrrd", "labels/b.nrrd", "val"),
        ManifestEntry("a", "images/a.nrrd", "labels/a.nrrd", "train"),
    ]
    path = write_manifest(entries, tmp_path)
    assert path == tmp_path / MANIFEST_NAME
    stored = json.loads(path.read_text("utf-8"))
    assert [r["case_id"] for r in stored] == ["a", "b"]
    assert stored[0]["image_path"] == "images/a.nrrd"
    frame = read_manifest(tmp_path)
    assert list(frame["case_id"]) == ["a", "b"]
    assert frame.loc[0, "image_path"] == str(tmp_path / "images/a.nrrd")
    assert list(frame["split"]) == ["train", "val"]


def test_duplicate_case_ids_are_rejected(tmp_path: Path) -> None:
    """Case ids are unique within a manifest."""
    entry = ManifestEntry("a", "images/a.nrrd", "labels/a.nrrd")
    with pytest.raises(ManifestError, match="duplicate"):
        write_manifest([entry, entry], tmp_path)


@pytest.mark.parametrize(
    ("content", "match"),
    [
        ("not json", "Cannot read"),
        ('{"case_id": "a"}', "JSON list"),
        ('[{"case_id": "a"}]', "missing required columns"),
        (
            '[{"case_id": "a", "image_path": "i", "label_path": "l", "split": "holdout"}]',
            "unknown split",
        ),
    ],
)
def test_malformed_manifests_are_rejected(tmp_path: Path, content: str, match: str) -> None:
    """Broken manifests raise ManifestError with a reason."""
    (tmp_path / MANIFEST_NAME).write_text(content, "utf-8")
    with pytest.raises(ManifestError, match=match):
        read_manifest(tmp_path)


def test_discover_cases_pairs_images_and_labels(tmp_path: Path) -> None:
    """Images without labels are still listed with an empty label path."""
    _write_case(tmp_path, "a", 0)
    _write_case(tmp_path, "b", 1, label=False)
    entries = discover_cases(tmp_path)
    assert [e.case_id for e in entries] == ["a", "b"]
    assert entries[0].label_path == str(tmp_path / "labels" / "a.nrrd")
    assert entries[1].label_path == ""
    assert load_entries(tmp_path) == entries


def test_load_samples_reads_cases_in_order(tmp_path: Path) -> None:
    """Samples come back sorted by case id with split and geometry intact."""
    for i, case_id in enumerate(["c", "a", "b"]):
        _write_case(tmp_path, case_id, i)
    write_manifest(
        [
            ManifestEntry(c, f"images/{c}.nrrd", f"labels/{c}.nrrd", s)
            for c, s in [("c", "val"), ("a", "train"), ("b", "train")]
        ],
        tmp_path,
    )
    samples = load_samples(tmp_path, num_classes=4)
    assert [s.case_id for s in samples] == ["a", "b", "c"]
    assert samples[0].image.spacing == (1.0, 2.0)
    assert samples[0].label.num_classes == 4
    assert [s.case_id for s in load_samples(tmp_path, splits=["val"])] == ["c"]


def test_load_samples_requires_a_manifest(tmp_path: Path) -> None:
    """A directory without manifest.json cannot be loaded as samples."""
    with pytest.raises(ManifestError):
        load_samples(tmp_path)


def test_split_fraction_validation() -> None:
    """Fractions live in [0, 1]."""
    with pytest.raises(ValidationError):
        assign_split("a", -0.1)
