"""PNG overlays of label maps on image slices (needs the optional ``viz`` extra)."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from ..core.errors import ConfigError, DimensionError
from ..core.validate import ensure_probability
from ..data.types import LabelMap, Volume
from ..utils.logging import get_logger

log = get_logger("viz.overlay")

DEFAULT_ALPHA = 0.45


def _pyplot() -> Any:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ConfigError(
            "overlay rendering needs matplotlib; install the 'viz' extra."
        ) from exc
    return plt


def class_colors(num_classes: int) -> np.ndarray:
    """RGB colour per class from ``tab10`` (cycled); row 0 is unused background."""
    plt = _pyplot()
    cmap = plt.get_cmap("tab10")
    return np.array([cmap(k % 10)[:3] for k in range(num_classes)], dtype=np.float64)


def blend(image: np.ndarray, labels: np.ndarray, num_classes: int, alpha: float) -> np.ndarray:
    """
    Grey-scale ``image`` with every foreground class tinted by its colour.

    The image is min-max scaled to ``[0, 1]``; a pixel of class ``k >= 1`` becomes
    ``(1 - alpha) * grey + alpha * colour[k]``.
    """
    ensure_probability(alpha, "alpha", inclusive=True)
    if image.shape != labels.shape or image.ndim != 2:
        raise DimensionError(
            f"overlay needs matching 2-d slices; got image {image.shape}, labels {labels.shape}."
        )
    low, high = float(image.min()), float(image.max())
    grey = (image - low) / (high - low) if high > low else np.zeros_like(image, dtype=float)
    rgb = np.repeat(grey[..., None], 3, axis=-1).astype(np.float64)
    colors = class_colors(num_classes)
    for k in range(1, num_classes):
        mask = labels == k
        rgb[mask] = (1.0 - alpha) * rgb[mask] + alpha * colors[k]
    return np.clip(rgb, 0.0, 1.0)


def _slice(data: np.ndarray, axis: int, index: int) -> np.ndarray:
    if data.ndim == 2:
        return data
    if not 0 <= index < data.shape[axis]:
        raise DimensionError(
            f"slice {index} is outside axis {axis} of extent {data.shape[axis]}."
        )
    return np.take(data, index, axis=axis)


def write_overlays(
    image: Volume,
    labels: LabelMap,
    out_dir: str | Path,
    *,
    slices: Sequence[int] | None = None,
    axis: int = 0,
    alpha: float = DEFAULT_ALPHA,
    case_id: str = "case",
) -> list[Path]:
    """
    Write one PNG per requested slice, named ``<case_id>_<axis>_<index>.png``.

    2-d inputs produce a single ``<case_id>.png``. For volumes ``slices`` defaults to
    the middle slice along ``axis``.
    """
    if image.shape != labels.shape:
        raise DimensionError(f"image {image.shape} and labels {labels.shape} differ in shape.")
    plt = _pyplot()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if image.ndim == 2:
        targets = [(out_dir / f"{case_id}.png", 0)]
    else:
        if not 0 <= axis < image.ndim:
            raise DimensionError(f"axis {axis} is outside a {image.ndim}-d volume.")
        picks = list(slices) if slices else [image.shape[axis] // 2]
        targets = [(out_dir / f"{case_id}_{axis}_{i}.png", i) for i in picks]
    written = []
    for path, index in targets:
        rgb = blend(
            _slice(image.data, axis, index),
            _slice(labels.data, axis, index),
            labels.num_classes,
            alpha,
        )
        plt.imsave(path, rgb, metadata={"Software": None})
        written.append(path)
    log.info("Wrote %d overlay image(s) for %s to %s", len(written), case_id, out_dir)
    return written


__all__ = ["DEFAULT_ALPHA", "blend", "class_colors", "write_overlays"]
