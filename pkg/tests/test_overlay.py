"""Tests for PNG label overlays."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

pytest.importorskip("matplotlib")

from vilu_net.core.errors import DimensionError  # noqa: E402
from vilu_net.data.types import LabelMap, Volume  # noqa: E402
from vilu_net.viz.overlay import blend, class_colors, write_overlays  # noqa: E402


def test_blend_tints_only_foreground() -> None:
    """Background stays grey; foreground moves alpha of the way to its colour."""
    image = np.array([[0.0, 1.0], [2.0, 4.0]])
    labels = np.array([[0, 1], [0, 1]])
    rgb = blend(image, labels, 2, 0.5)
    colour = class_colors(2)[1]
    np.testing.assert_allclose(rgb[0, 0], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(rgb[1, 0], [0.5, 0.5, 0.5])
    np.testing.assert_allclose(rgb[1, 1], 0.5 * 1.0 + 0.5 * colour)
    np.testing.assert_allclose(blend(image, labels, 2, 0.0)[..., 0], image / 4.0)


def test_blend_rejects_mismatched_slices() -> None:
    """Image and label slices must agree in shape."""
    with pytest.raises(DimensionError, match="matching 2-d"):
        blend(np.zeros((2, 2)), np.zeros((2, 3), int), 2, 0.5)


def test_volume_overlays_default_to_the_middle_slice(tmp_path: Path) -> None:
    """Volumes write one PNG per requested slice along the chosen axis."""
    data = np.zeros((4, 6, 8))
    labels = np.zeros((4, 6, 8), int)
    labels[1:3, 2:4, 3:6] = 1
    image = Volume(data=data, spacing=(1, 1, 1))
    label_map = LabelMap(data=labels, num_classes=2, spacing=(1, 1, 1))
    written = write_overlays(image, label_map, tmp_path, axis=2, case_id="c")
    assert written == [tmp_path / "c_2_4.png"]
    written = write_overlays(image, label_map, tmp_path, slices=[0, 3], case_id="c")
    assert [p.name for p in written] == ["c_0_0.png", "c_0_3.png"]
    with pytest.raises(DimensionError, match="outside axis"):
        write_overlays(image, label_map, tmp_path, slices=[9])
