"""Central finite-difference checks against reverse-mode gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from ..core.validate import ensure_positive, ensure_positive_int
from ..utils.logging import get_logger
from .tensor import Tensor, backward, no_grad, zero_grads

log = get_logger("autodiff.gradcheck")

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class GradcheckReport:
    """Outcome of one finite-difference comparison."""

    name: str
    checked: int
    max_rel_error: float
    worst_parameter: str
    worst_index: tuple[int, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def to_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "checked": self.checked,
            "max_rel_error": self.max_rel_error,
            "worst_parameter": self.worst_parameter,
            "worst_index": list(self.worst_index),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def relative_error(analytic: float, numeric: float, floor: float = DEFAULT_FLOOR) -> float:
    """``|a - n| / max(|a|, |n|, floor)``."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _sample_indices(
    params: Sequence[tuple[str, Tensor]], samples: int, rng: np.random.Generator
) -> list[tuple[int, tuple[int, ...]]]:
    sizes = np.array([p.size for _, p in params])
    total = int(sizes.sum())
    if samples >= total:
        flat = np.arange(total)
    else:
        flat = np.sort(rng.choice(total, size=samples, replace=False))
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = []
    for position in flat:
        which = int(np.searchsorted(offsets, position, side="right") - 1)
        local = int(position - offsets[which])
        index = np.unravel_index(local, params[which][1].shape)
        picks.append((which, tuple(int(i) for i in index)))
    return picks


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[tuple[str, Tensor]],
    *,
    samples: int = 200,
    step: float = DEFAULT_STEP,
    tolerance: float = 1e-4,
    floor: float = DEFAULT_FLOOR,
    seed: int = 0,
    name: str = "gradcheck",
) -> GradcheckReport:
    """
    Compare autodiff gradients with central differences on sampled entries.

    Parameters
    ----------
    loss_fn:
        Zero-argument callable recomputing a scalar loss from the current parameter
        values. It is called once with gradient recording and twice per sampled entry
        without.
    params:
        ``(name, tensor)`` pairs; every tensor must have ``requires_grad=True``.
    samples:
        Number of parameter entries drawn uniformly without replacement across all
        parameters (all entries when there are fewer).
    """
    ensure_positive_int(samples, "samples")
    ensure_positive(step, "step")
    tensors = [p for _, p in params]
    zero_grads(tensors)
    backward(loss_fn())
    analytic = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in tensors]

    rng = np.random.default_rng(seed)
    picks = _sample_indices(params, samples, rng)
    worst = (-1.0, "", ())
    with no_grad():
        for which, index in picks:
            tensor = tensors[which]
            original = tensor.data[index]
            tensor.data[index] = original + step
            plus = loss_fn().item()
            tensor.data[index] = original - step
            minus = loss_fn().item()
            tensor.data[index] = original
            numeric = (plus - minus) / (2.0 * step)
            err = relative_error(float(analytic[which][index]), numeric, floor)
            if err > worst[0]:
                worst = (err, params[which][0], index)
    zero_grads(tensors)
    report = GradcheckReport(
        name=name,
        checked=len(picks),
        max_rel_error=max(worst[0], 0.0),
        worst_parameter=worst[1],
        worst_index=worst[2],
        tolerance=tolerance,
    )
    log.debug(
        "gradcheck %s checked=%d max_rel_error=%.3e worst=%s%s",
        name,
        report.checked,
        report.max_rel_error,
        report.worst_parameter,
        report.worst_index,
    )
    return report


__all__ = ["GradcheckReport", "check_gradients", "relative_error"]
