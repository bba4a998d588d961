"""Tests for the seeded synthetic dataset generator."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from vilu_net.core.errors import GenerationError, ValidationError
from vilu_net.data.manifest import load_samples
from vilu_net.data.synth import (
    BACKGROUND_MEAN,
    BACKGROUND_STD,
    FOREGROUND_MEAN,
    MIN_BLOB_EXTENT,
    SynthConfig,
    class_mean,
    synth_case,
    synth_dataset,
    write_dataset,
)


def test_same_seed_gives_identical_cases() -> None:
    """Equal arguments reproduce every voxel and label."""
    first = synth_dataset(0, 3, (24, 20), 3)
    second = synth_dataset(0, 3, (24, 20), 3)
    for a, b in zip(first, second, strict=True):
        assert a.case_id == b.case_id
        assert a.image.data.tobytes() == b.image.data.tobytes()
        assert a.label.data.tobytes() == b.label.data.tobytes()
    other = synth_dataset(1, 1, (24, 20), 3)
    assert other[0].image.data.tobytes() != first[0].image.data.tobytes()


def test_written_dataset_is_byte_identical(tmp_path: Path) -> None:
    """Two writes of the same seed produce the same files."""
    for name in ("a", "b"):
        write_dataset(synth_dataset(0, 2, (16, 16, 8)), tmp_path / name, encoding="gzip")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.*"))
    assert len(files) == 5
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_foreground_is_separable_from_background() -> None:
    """Class intensities differ from the background by more than three deviations."""
    samples = synth_dataset(5, 4, (48, 48), 3)
    image = np.concatenate([s.image.data.ravel() for s in samples])
    labels = np.concatenate([s.label.data.ravel() for s in samples])
    background = image[labels == 0]
    assert abs(background.mean() - BACKGROUND_MEAN) < 5.0
    assert abs(background.std() - BACKGROUND_STD) < 5.0
    for label in (1, 2):
        mean = image[labels == label].mean()
        assert abs(mean - class_mean(label)) < 5.0
        assert mean - background.mean() > 3 * BACKGROUND_STD
    assert class_mean(1) == FOREGROUND_MEAN


def test_every_case_respects_fraction_bounds_and_has_all_classes() -> None:
    """Foreground share stays within bounds and every class appears."""
    cfg = SynthConfig(shape=(32, 32), num_classes=3, foreground_fraction=(0.1, 0.3))
    for sample in synth_dataset(3, 10, config=cfg):
        fraction = float(np.mean(sample.label.data > 0))
        assert 0.1 <= fraction <= 0.3
        assert sample.meta["foreground_fraction"] == pytest.approx(fraction)
        assert set(np.unique(sample.label.data)) == {0, 1, 2}
        assert sample.label.num_classes == 3
        assert sample.image.spacing == (1.0, 1.0)


def test_unreachable_fraction_raises_generation_error() -> None:
    """A band no layout can hit gives up after max_attempts."""
    cfg = SynthConfig(shape=(16, 16), foreground_fraction=(0.99, 1.0), max_attempts=5)
    with pytest.raises(GenerationError, match="after 5 attempts"):
        synth_case(np.random.default_rng(0), cfg, "case_000")


def test_tiny_grid_raises_generation_error() -> None:
    """Extents below four voxels leave no room for blobs."""
    with pytest.raises(GenerationError, match="too small"):
        synth_dataset(0, 1, (3, 16))


@pytest.mark.parametrize("shape", [(MIN_BLOB_EXTENT, 16), (MIN_BLOB_EXTENT,) * 3, (5, 5)])
def test_smallest_allowed_extent_generates_for_every_seed(shape: tuple[int, ...]) -> None:
    """Blobs fit inside grids at the minimum extent whatever the seed."""
    for seed in range(20):
        (sample,) = synth_dataset(seed, 1, shape)
        assert sample.label.data.shape == shape
        assert set(np.unique(sample.label.data)) == {0, 1}
        assert 0.05 <= sample.meta["foreground_fraction"] <= 0.4


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        ({"num_classes": 1}, "num_classes must be >= 2"),
        ({"num_classes": 2.0}, "integer"),
        ({"shape": (8,)}, "2-d or 3-d"),
        ({"shape": (8, 8), "spacing": (1.0,)}, "does not match"),
        ({"foreground_fraction": (0.5, 0.2)}, "empty"),
        ({"blobs_per_class": (3, 1)}, "empty"),
        ({"val_fraction": 1.5}, "val_fraction"),
    ],
)
def test_config_validation(kwargs: dict[str, object], match: str) -> None:
    """Invalid generator settings raise ValidationError."""
    with pytest.raises(ValidationError, match=match):
        SynthConfig(**kwargs)  # type: ignore[arg-type]


def test_written_dataset_loads_back(tmp_path: Path) -> None:
    """write_dataset output is a loadable manifest with matching voxels."""
    cfg = SynthConfig(shape=(12, 12, 6), spacing=(0.5, 0.5, 2.0))
    samples = synth_dataset(2, 3, config=cfg)
    write_dataset(samples, tmp_path)
    loaded = load_samples(tmp_path)
    assert [s.case_id for s in loaded] == ["case_000", "case_001", "case_002"]
    for original, back in zip(samples, loaded, strict=True):
        np.testing.assert_array_equal(back.image.data, original.image.data)
        np.testing.assert_array_equal(back.label.data, original.label.data)
        assert back.image.spacing == (0.5, 0.5, 2.0)
        assert back.split == original.split
