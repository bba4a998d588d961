"""Tests for overlap, surface-distance metrics and case reports."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from vilu_net.core.errors import DimensionError, ValidationError
from vilu_net.metrics import (
    CSV_COLUMNS,
    dsc_iou,
    evaluate_case,
    grid_diagonal,
    hausdorff,
    nsd,
    surface_extract,
    write_aggregate_csv,
)

SPACING = (1.0, 0.5, 2.0)


def brute_surface(mask: np.ndarray) -> set[tuple[int, ...]]:
    """Foreground voxels with a background face neighbour, by direct enumeration."""
    padded = np.pad(mask.astype(bool), 1)
    points = set()
    for index in zip(*np.nonzero(mask), strict=True):
        for axis in range(mask.ndim):
            for step in (-1, 1):
                neighbour = [i + 1 for i in index]
                neighbour[axis] += step
                if not padded[tuple(neighbour)]:
                    points.add(tuple(int(i) for i in index))
    return points


def brute_directed(a: np.ndarray, b: np.ndarray, spacing: tuple[float, ...]) -> np.ndarray:
    diff = (a[:, None, :] - b[None, :, :]) * np.asarray(spacing)
    return np.sqrt((diff**2).sum(axis=-1)).min(axis=1)


def _random_pair(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    pred = rng.random((16, 16, 16)) < 0.3
    flips = rng.random((16, 16, 16)) < 0.1
    return pred, pred ^ flips


def test_identical_masks_score_one() -> None:
    """pred == ref scores DSC and IoU of one."""
    mask = np.zeros((4, 4), dtype=int)
    mask[1:3, 1:3] = 1
    assert dsc_iou(mask, mask, 1) == (1.0, 1.0)


def test_disjoint_masks_score_zero() -> None:
    """Non-overlapping masks score zero."""
    a = np.array([1, 1, 0, 0])
    assert dsc_iou(a, 1 - a, 1) == (0.0, 0.0)


def test_partial_overlap_by_enumeration() -> None:
    """|A| = |B| = 2 with one shared voxel gives DSC 0.5 and IoU 1/3."""
    dsc, iou = dsc_iou(np.array([1, 1, 0]), np.array([0, 1, 1]), 1)
    assert dsc == 0.5
    assert iou == pytest.approx(1 / 3, abs=1e-15)


def test_both_empty_masks_score_one() -> None:
    """Absent classes in both maps count as a perfect match."""
    assert dsc_iou(np.zeros(5), np.zeros(5), 1) == (1.0, 1.0)


def test_overlap_shape_mismatch() -> None:
    """Masks must share a shape."""
    with pytest.raises(DimensionError):
        dsc_iou(np.zeros((2, 2)), np.zeros((2, 3)), 1)


def test_growing_overlap_never_lowers_scores() -> None:
    """Sliding a fixed-size box onto the reference increases DSC and IoU."""
    ref = np.zeros(20, dtype=int)
    ref[10:15] = 1
    previous = (-1.0, -1.0)
    for start in range(3, 11):
        pred = np.zeros(20, dtype=int)
        pred[start : start + 5] = 1
        scores = dsc_iou(pred, ref, 1)
        assert scores[0] >= previous[0] and scores[1] >= previous[1]
        previous = scores


def test_single_voxel_surface_is_itself() -> None:
    """A lone voxel is its own boundary."""
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 3] = True
    assert surface_extract(mask).tolist() == [[2, 3]]


def test_solid_square_has_eight_boundary_voxels() -> None:
    """Only the centre of a 3x3 square is interior."""
    mask = np.zeros((5, 5), dtype=bool)
    mask[1:4, 1:4] = True
    surface = surface_extract(mask)
    assert len(surface) == 8
    assert [2, 2] not in surface.tolist()


def test_surface_with_spacing_is_in_millimetres() -> None:
    """Passing spacing scales the same boundary voxels to physical positions."""
    mask = np.zeros((4, 4, 4), dtype=bool)
    mask[1, 2, 3] = True
    np.testing.assert_array_equal(surface_extract(mask, SPACING), [[1.0, 1.0, 6.0]])
    with pytest.raises(DimensionError, match="spacing of length 2"):
        surface_extract(mask, (1.0, 1.0))
    with pytest.raises(ValidationError, match=r"spacing\[1\] must be positive"):
        surface_extract(mask, (1.0, 0.0, 1.0))


def test_empty_mask_has_empty_surface() -> None:
    """No foreground, no boundary."""
    assert surface_extract(np.zeros((3, 3, 3))).shape == (0, 3)


def test_array_border_counts_as_background() -> None:
    """A full mask is all boundary on its faces."""
    surface = surface_extract(np.ones((3, 3, 3), dtype=bool))
    assert len(surface) == 26


def test_identical_surfaces_have_zero_distance() -> None:
    """Identical surfaces give (0, 0) and NSD one."""
    surface = np.array([[0, 0], [2, 5], [7, 1]])
    distances = hausdorff(surface, surface, (1.0, 1.0))
    assert (distances.hd, distances.hd95) == (0.0, 0.0)
    assert nsd(surface, surface, (1.0, 1.0), 0.5) == 1.0


def test_single_pair_distance() -> None:
    """(0,0) to (3,4) is five millimetres."""
    distances = hausdorff(np.array([[0, 0]]), np.array([[3, 4]]), (1.0, 1.0))
    assert (distances.hd, distances.hd95) == (5.0, 5.0)


def test_anisotropic_spacing_scales_coordinates() -> None:
    """One voxel along an axis of spacing two is two millimetres."""
    distances = hausdorff(np.array([[0, 0]]), np.array([[0, 1]]), (1.0, 2.0))
    assert (distances.hd, distances.hd95) == (2.0, 2.0)


def test_far_surfaces_have_zero_nsd() -> None:
    """Every point beyond tolerance gives NSD zero."""
    a = np.array([[0, 0], [0, 1]])
    b = np.array([[10, 10], [10, 11]])
    assert nsd(a, b, (1.0, 1.0), 2.0) == 0.0


def test_empty_surface_conventions() -> None:
    """Both empty is perfect; one empty is undefined for HD and zero NSD."""
    empty = np.zeros((0, 2), dtype=int)
    point = np.array([[1, 1]])
    assert nsd(empty, empty, (1.0, 1.0)) == 1.0
    assert nsd(empty, point, (1.0, 1.0)) == 0.0
    assert hausdorff(empty, empty, (1.0, 1.0)).defined
    assert not hausdorff(point, empty, (1.0, 1.0)).defined


def test_nsd_requires_positive_tolerance() -> None:
    """The tolerance must be positive."""
    with pytest.raises(ValueError, match="tolerance_mm"):
        nsd(np.array([[0, 0]]), np.array([[0, 0]]), (1.0, 1.0), 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_metrics_match_brute_force_oracles(seed: int) -> None:
    """Set metrics match exactly and distances to 1e-9 mm on random 16^3 pairs."""
    pred, ref = _random_pair(seed)
    a, b = surface_extract(pred), surface_extract(ref)
    assert {tuple(p) for p in a.tolist()} == brute_surface(pred)
    assert {tuple(p) for p in b.tolist()} == brute_surface(ref)

    overlap = int((pred & ref).sum())
    dsc, iou = dsc_iou(pred.astype(int), ref.astype(int), 1)
    assert dsc == 2 * overlap / (pred.sum() + ref.sum())
    assert iou == overlap / (pred | ref).sum()

    forward, backward = brute_directed(a, b, SPACING), brute_directed(b, a, SPACING)
    distances = hausdorff(a, b, SPACING)
    assert distances.hd == pytest.approx(max(forward.max(), backward.max()), abs=1e-9)
    expected95 = max(np.percentile(forward, 95), np.percentile(backward, 95))
    assert distances.hd95 == pytest.approx(expected95, abs=1e-9)
    hits = int((forward <= 1.0).sum() + (backward <= 1.0).sum())
    assert nsd(a, b, SPACING, 1.0) == hits / (len(a) + len(b))


@pytest.mark.parametrize("seed", range(5))
def test_metric_properties_on_random_pairs(seed: int) -> None:
    """Symmetry, the DSC-IoU identity and hd95 <= hd."""
    pred, ref = _random_pair(100 + seed)
    forward = evaluate_case(pred.astype(int), ref.astype(int), SPACING, 2).per_class[1]
    swapped = evaluate_case(ref.astype(int), pred.astype(int), SPACING, 2).per_class[1]
    for name in ("dsc", "iou", "nsd", "hd"):
        assert getattr(forward, name) == pytest.approx(getattr(swapped, name), abs=1e-12)
    assert forward.dsc == pytest.approx(2 * forward.iou / (1 + forward.iou), abs=1e-12)
    assert forward.iou <= forward.dsc
    assert forward.hd95 <= forward.hd


def test_case_report_per_class_and_conventions() -> None:
    """Missing predictions fall back to the grid diagonal; absent classes score one."""
    ref = np.zeros((8, 8), dtype=int)
    ref[2:5, 2:5] = 1
    pred = np.zeros_like(ref)
    report = evaluate_case(pred, ref, (1.0, 2.0), 3, tolerance_mm=1.5, case_id="c1")
    assert sorted(report.per_class) == [1, 2]
    missing, absent = report.per_class[1], report.per_class[2]
    assert (missing.dsc, missing.iou, missing.nsd) == (0.0, 0.0, 0.0)
    assert not missing.hd_defined
    assert missing.hd == missing.hd95 == grid_diagonal((8, 8), (1.0, 2.0))
    assert (absent.dsc, absent.iou, absent.nsd, absent.hd, absent.hd95) == (1, 1, 1, 0, 0)
    assert report.mean["dsc"] == 0.5
    assert report.connectivity == "face"


def test_case_report_serialization(tmp_path: Path) -> None:
    """JSON per case and a CSV with one row per case and class."""
    ref = np.zeros((6, 6, 6), dtype=int)
    ref[1:4, 1:4, 1:4] = 1
    report = evaluate_case(ref, ref, (1.0, 1.0, 1.0), 2, case_id="self")
    payload = json.loads(report.write_json(tmp_path / "self.json").read_text())
    assert payload["per_class"]["1"]["dsc"] == 1.0
    assert payload["nsd_tolerance_mm"] == 1.0
    write_aggregate_csv([report], tmp_path / "metrics.csv")
    frame = pd.read_csv(tmp_path / "metrics.csv")
    assert list(frame.columns) == CSV_COLUMNS
    assert frame.loc[0, "hd"] == 0.0


def test_case_report_rejects_bad_spacing() -> None:
    """Spacing needs one entry per axis."""
    with pytest.raises(DimensionError, match="spacing"):
        evaluate_case(np.zeros((4, 4)), np.zeros((4, 4)), (1.0,), 2)
