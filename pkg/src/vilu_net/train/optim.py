"""Adam with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.tensor import Tensor
from ..core.errors import CheckpointError, NumericError
from ..utils.logging import get_logger
from .config import TrainConfig

log = get_logger("train.optim")

NamedParams = Sequence[tuple[str, Tensor]]


@dataclass
class AdamState:
    """First and second moments per parameter name, and the number of steps taken."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, params: NamedParams) -> AdamState:
        return cls(
            step=0,
            m={name: np.zeros_like(p.data) for name, p in params},
            v={name: np.zeros_like(p.data) for name, p in params},
        )

    def tensors(self) -> dict[str, np.ndarray]:
        """Flat ``adam.m.<name>`` / ``adam.v.<name>`` arrays for checkpoints."""
        out = {f"adam.m.{name}": array for name, array in self.m.items()}
        out.update({f"adam.v.{name}": array for name, array in self.v.items()})
        return out

    @classmethod
    def from_tensors(
        cls, tensors: Mapping[str, np.ndarray], step: int, params: NamedParams
    ) -> AdamState:
        state = cls(step=step)
        problems = []
        for name, p in params:
            for moment, store in (("m", state.m), ("v", state.v)):
                key = f"adam.{moment}.{name}"
                if key not in tensors:
                    problems.append(f"missing {key}")
                elif tuple(tensors[key].shape) != p.shape:
                    problems.append(f"{key}: checkpoint {tensors[key].shape} != model {p.shape}")
                else:
                    store[name] = np.array(tensors[key], dtype=p.dtype)
        if problems:
            raise CheckpointError("Optimizer state does not match model: " + "; ".join(problems))
        return state


def _gradient(name: str, p: Tensor) -> np.ndarray:
    if p.grad is None:
        return np.zeros_like(p.data)
    if not np.all(np.isfinite(p.grad)):
        raise NumericError(f"gradient of parameter {name!r} is not finite.")
    return p.grad


def global_grad_norm(params: NamedParams) -> float:
    total = 0.0
    for name, p in params:
        g = _gradient(name, p)
        total += float(np.sum(np.square(g, dtype=np.float64)))
    return math.sqrt(total)


def clip_gradients(params: NamedParams, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for _, p in params:
            if p.grad is not None:
                p.grad = p.grad * p.grad.dtype.type(scale)
        log.debug("clipped gradient norm %.4g to %.4g", norm, max_norm)
    return norm


def adam_step(
    params: NamedParams,
    state: AdamState,
    cfg: TrainConfig,
    *,
    lr: float | None = None,
) -> AdamState:
    """
    One in-place Adam update.

    ``m <- b1 m + (1 - b1) g``, ``v <- b2 v + (1 - b2) g^2`` and
    ``theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`` with the usual bias
    corrections. Every gradient is checked before any parameter moves, so a
    non-finite gradient leaves parameters and moments untouched.
    """
    rate = cfg.lr if lr is None else lr
    grads = [(name, p, _gradient(name, p)) for name, p in params]
    state.step += 1
    t = state.step
    correction1 = 1.0 - cfg.beta1**t
    correction2 = 1.0 - cfg.beta2**t
    for name, p, g in grads:
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= (rate * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(p.dtype)
    return state


__all__ = ["AdamState", "adam_step", "clip_gradients", "global_grad_norm"]
