"""Boundary extraction and surface-distance metrics in physical units."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..core.errors import DimensionError
from ..core.validate import ensure_positive
from ..utils.logging import get_logger

log = get_logger("metrics.surface")

CONNECTIVITY = "face"


@dataclass(frozen=True)
class SurfaceDistances:
    """Hausdorff distances in mm; ``defined`` is false when exactly one surface is empty."""

    hd: float
    hd95: float
    defined: bool = True


def surface_extract(mask: np.ndarray, spacing: Sequence[float] | None = None) -> np.ndarray:
    """
    Coordinates ``(N, rank)`` of the mask boundary.

    A foreground voxel is on the boundary when at least one face neighbour is
    background; voxels on the array border count as touching background. Without
    ``spacing`` the result holds integer voxel indices; with it, positions in mm.
    """
    mask = np.asarray(mask).astype(bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    interior = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    points = np.argwhere(mask & ~interior)
    if spacing is None:
        return points
    for axis, step in enumerate(spacing):
        ensure_positive(step, f"spacing[{axis}]")
    return _scaled(points, spacing)


def _scaled(points: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    spacing_arr = np.asarray(spacing, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != spacing_arr.size:
        raise DimensionError(
            f"surface points {points.shape} do not match spacing of length {spacing_arr.size}."
        )
    return points.astype(np.float64) * spacing_arr


def directed_distances(
    source: np.ndarray, target: np.ndarray, spacing: Sequence[float]
) -> np.ndarray:
    """Distance (mm) from every ``source`` point to its nearest ``target`` point."""
    tree = cKDTree(_scaled(target, spacing))
    distances, _ = tree.query(_scaled(source, spacing), k=1)
    return np.asarray(distances, dtype=np.float64)


def hausdorff(
    pred_surface: np.ndarray, ref_surface: np.ndarray, spacing: Sequence[float]
) -> SurfaceDistances:
    """Symmetric maximum and 95th-percentile Hausdorff distances.

    ``hd95`` is the larger of the two directed 95th percentiles (linear
    interpolation). Both surfaces empty gives zeros; one empty gives an undefined
    result with infinite distances that reports replace by a worst case.
    """
    empty_pred, empty_ref = len(pred_surface) == 0, len(ref_surface) == 0
    if empty_pred and empty_ref:
        return SurfaceDistances(0.0, 0.0)
    if empty_pred or empty_ref:
        log.warning("Hausdorff distance undefined: one surface is empty.")
        return SurfaceDistances(float("inf"), float("inf"), defined=False)
    forward = directed_distances(pred_surface, ref_surface, spacing)
    backward = directed_distances(ref_surface, pred_surface, spacing)
    hd = max(float(forward.max()), float(backward.max()))
    hd95 = max(float(np.percentile(forward, 95)), float(np.percentile(backward, 95)))
    return SurfaceDistances(hd, hd95)


def nsd(
    pred_surface: np.ndarray,
    ref_surface: np.ndarray,
    spacing: Sequence[float],
    tolerance_mm: float = 1.0,
) -> float:
    """Fraction of both surfaces lying within ``tolerance_mm`` of the other surface."""
    ensure_positive(tolerance_mm, "tolerance_mm")
    empty_pred, empty_ref = len(pred_surface) == 0, len(ref_surface) == 0
    if empty_pred and empty_ref:
        return 1.0
    if empty_pred or empty_ref:
        return 0.0
    forward = directed_distances(pred_surface, ref_surface, spacing)
    backward = directed_distances(ref_surface, pred_surface, spacing)
    hits = int((forward <= tolerance_mm).sum()) + int((backward <= tolerance_mm).sum())
    return hits / (forward.size + backward.size)


__all__ = [
    "CONNECTIVITY",
    "SurfaceDistances",
    "directed_distances",
    "hausdorff",
    "nsd",
    "surface_extract",
]
