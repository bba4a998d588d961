"""Optimization hyper-parameters."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields
from typing import Any

from ..autodiff.tensor import PRECISIONS
from ..core.errors import ConfigError
from ..core.validate import ensure_positive, ensure_positive_int, ensure_probability


@dataclass(frozen=True)
class TrainConfig:
    """
    Adam training settings.

    Parameters
    ----------
    lr:
        Base learning rate.
    epochs:
        Passes over the training split; every epoch has ``ceil(N / batch_size)`` steps.
    val_interval:
        Validate and write checkpoints every ``val_interval`` epochs (and after the last).
    lr_decay:
        ``"constant"`` or ``"poly"`` (``lr * (1 - epoch / epochs) ** 0.9``).
    clip_norm:
        Global gradient-norm cap; ``None`` disables clipping.
    checkpoint_dir:
        Directory receiving ``last.ckpt``, ``best.ckpt`` and ``train_log.csv``.
    """

    lr: float = 0.005
    batch_size: int = 2
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    val_interval: int = 1
    checkpoint_dir: str = "checkpoints"
    precision: str = "float32"
    lr_decay: str = "constant"
    poly_exponent: float = 0.9
    clip_norm: float | None = None

    def __post_init__(self) -> None:
        ensure_positive(self.lr, "lr")
        ensure_positive_int(self.batch_size, "batch_size")
        ensure_positive_int(self.epochs, "epochs")
        ensure_positive_int(self.val_interval, "val_interval")
        ensure_probability(self.beta1, "beta1", inclusive=True)
        ensure_probability(self.beta2, "beta2", inclusive=True)
        if self.beta1 >= 1.0 or self.beta2 >= 1.0:
            raise ConfigError("beta1 and beta2 must be < 1.")
        ensure_positive(self.eps, "eps")
        ensure_positive(self.poly_exponent, "poly_exponent")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer; got {self.seed!r}.")
        if self.precision not in PRECISIONS:
            raise ConfigError(
                f"precision must be one of {sorted(PRECISIONS)}; got {self.precision!r}."
            )
        if self.lr_decay not in ("constant", "poly"):
            raise ConfigError(f"lr_decay must be 'constant' or 'poly'; got {self.lr_decay!r}.")
        if self.clip_norm is not None:
            ensure_positive(self.clip_norm, "clip_norm")

    def learning_rate(self, epoch: int) -> float:
        """Rate used during zero-based ``epoch``."""
        if self.lr_decay == "poly":
            return self.lr * (1.0 - epoch / self.epochs) ** self.poly_exponent
        return self.lr

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown train config keys: {unknown}.")
        return cls(**dict(data))


__all__ = ["TrainConfig"]
