"""Epoch loop: shuffled mini-batches, Adam updates, validation and checkpoints."""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..autodiff.tensor import Tensor, backward, precision
from ..core.errors import DataError, DimensionError, NumericError
from ..data.types import Sample
from ..metrics.losses import combined_loss
from ..model.checkpoint import Checkpoint, read_checkpoint, save_model
from ..model.vilu import ViLUNet
from ..utils.logging import get_logger
from .config import TrainConfig
from .evaluate import mean_foreground_dsc
from .optim import AdamState, adam_step, clip_gradients

log = get_logger("train.loop")

LAST_NAME = "last.ckpt"
BEST_NAME = "best.ckpt"
LOG_NAME = "train_log.csv"
LOG_COLUMNS = ["step", "epoch", "loss", "val_dsc"]


@dataclass
class TrainState:
    """
    Resumable optimization state.

    ``epoch`` counts completed epochs; ``rng_state`` is the bit-generator state of
    the shuffling stream after those epochs.
    """

    step: int
    epoch: int
    adam: AdamState
    best_val_dsc: float | None
    rng_state: dict[str, Any]
    losses: list[float] = field(default_factory=list, repr=False)

    def metadata(self, cfg: TrainConfig) -> dict[str, Any]:
        return {
            "step": self.step,
            "epoch": self.epoch,
            "adam_step": self.adam.step,
            "best_val_dsc": self.best_val_dsc,
            "rng_state": self.rng_state,
            "train_config": {k: v for k, v in cfg.to_dict().items() if k != "checkpoint_dir"},
        }


def stack_batch(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """``(B, 1, *spatial)`` images and ``(B, *spatial)`` labels."""
    shapes = {s.image.shape for s in samples}
    if len(shapes) != 1:
        raise DimensionError(f"batch mixes case shapes {sorted(shapes)}.")
    images = np.stack([s.image.data for s in samples])[:, None]
    labels = np.stack([s.label.data for s in samples])
    return images, labels


def iterate_batches(
    samples: Sequence[Sample], batch_size: int, rng: np.random.Generator
) -> Iterator[list[Sample]]:
    """One shuffled epoch; the last batch may be smaller."""
    order = rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        yield [samples[int(i)] for i in order[start : start + batch_size]]


def _save(path: Path, model: ViLUNet, state: TrainState, cfg: TrainConfig) -> Path:
    return save_model(path, model, extra=state.adam.tensors(), metadata=state.metadata(cfg))


def _restore(model: ViLUNet, checkpoint: Checkpoint) -> TrainState:
    model.load_state_dict(checkpoint.model_state())
    meta = checkpoint.metadata
    try:
        adam = AdamState.from_tensors(
            checkpoint.prefixed(""), int(meta["adam_step"]), list(model.named_parameters())
        )
        return TrainState(
            step=int(meta["step"]),
            epoch=int(meta["epoch"]),
            adam=adam,
            best_val_dsc=meta.get("best_val_dsc"),
            rng_state=meta["rng_state"],
        )
    except KeyError as exc:
        raise DataError(f"checkpoint lacks training state field {exc}.") from exc


def _append_log(path: Path, rows: list[dict[str, Any]]) -> None:
    frame = pd.DataFrame(rows, columns=LOG_COLUMNS)
    frame.to_csv(path, mode="a", header=not path.exists(), index=False)


def _truncate_log(path: Path, step: int) -> None:
    """Drop log rows written after ``step`` by a run that is being resumed."""
    if not path.exists():
        return
    frame = pd.read_csv(path)
    frame[frame["step"] <= step].to_csv(path, index=False)


def _train_step(
    model: ViLUNet,
    batch: list[Sample],
    state: TrainState,
    cfg: TrainConfig,
    lr: float,
) -> float:
    images, labels = stack_batch(batch)
    model.zero_grads()
    loss: Tensor = combined_loss(model(images), labels)
    value = loss.item()
    if not math.isfinite(value):
        raise NumericError(f"training loss is {value}.")
    backward(loss)
    params = list(model.named_parameters())
    if cfg.clip_norm is not None:
        clip_gradients(params, cfg.clip_norm)
    adam_step(params, state.adam, cfg, lr=lr)
    return value


def train(
    model: ViLUNet,
    samples: Sequence[Sample],
    cfg: TrainConfig,
    *,
    val_samples: Sequence[Sample] = (),
    resume: str | Path | None = None,
) -> TrainState:
    """
    Optimize ``model`` in place on ``samples``.

    Every epoch draws a fresh permutation from ``default_rng(cfg.seed)``. After every
    ``val_interval`` epochs (and the last one) the mean foreground DSC of
    ``val_samples`` is logged and ``last.ckpt`` is written; ``best.ckpt`` follows
    the best validation DSC. Each step appends a ``step,epoch,loss,val_dsc`` row to
    ``train_log.csv``. A non-finite loss or gradient aborts with :class:`NumericError`
    and leaves the last checkpoint in place.

    Parameters
    ----------
    resume:
        Checkpoint written by an earlier call; training continues from its epoch with
        the stored parameters, Adam moments and shuffling state.
    """
    if not samples:
        raise DataError("training needs at least one case.")
    out_dir = Path(cfg.checkpoint_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    last_path, best_path, log_path = out_dir / LAST_NAME, out_dir / BEST_NAME, out_dir / LOG_NAME
    num_classes = model.config.num_classes
    model.to_precision(cfg.precision)
    rng = np.random.default_rng(cfg.seed)

    with precision(cfg.precision):
        if resume is not None:
            state = _restore(model, read_checkpoint(resume))
            rng.bit_generator.state = state.rng_state
            _truncate_log(log_path, state.step)
            log.info("Resuming from %s at epoch %d (step %d)", resume, state.epoch, state.step)
        else:
            state = TrainState(
                step=0,
                epoch=0,
                adam=AdamState.zeros(list(model.named_parameters())),
                best_val_dsc=None,
                rng_state=rng.bit_generator.state,
            )
            if log_path.exists():
                log_path.unlink()
            _save(last_path, model, state, cfg)

        for epoch in range(state.epoch, cfg.epochs):
            lr = cfg.learning_rate(epoch)
            rows: list[dict[str, Any]] = []
            for batch in iterate_batches(samples, cfg.batch_size, rng):
                try:
                    loss = _train_step(model, batch, state, cfg, lr)
                except NumericError as exc:
                    _append_log(log_path, rows)
                    log.error("Aborting at step %d: %s", state.step + 1, exc)
                    raise NumericError(
                        f"training aborted at step {state.step + 1} (epoch {epoch}): {exc} "
                        f"Last good checkpoint: {last_path}"
                    ) from exc
                state.step += 1
                state.losses.append(loss)
                rows.append({"step": state.step, "epoch": epoch, "loss": loss, "val_dsc": None})
            state.epoch = epoch + 1
            state.rng_state = rng.bit_generator.state
            if state.epoch % cfg.val_interval == 0 or state.epoch == cfg.epochs:
                val_dsc = (
                    mean_foreground_dsc(model, val_samples, num_classes) if val_samples else None
                )
                rows[-1]["val_dsc"] = val_dsc
                improved = val_dsc is not None and (
                    state.best_val_dsc is None or val_dsc > state.best_val_dsc
                )
                if improved:
                    state.best_val_dsc = val_dsc
                _save(last_path, model, state, cfg)
                if improved:
                    _save(best_path, model, state, cfg)
            _append_log(log_path, rows)
            log.info(
                "epoch %d/%d step %d loss %.5f val_dsc %s",
                state.epoch,
                cfg.epochs,
                state.step,
                float(np.mean([r["loss"] for r in rows])),
                rows[-1]["val_dsc"],
            )
    return state


__all__ = [
    "BEST_NAME",
    "LAST_NAME",
    "LOG_COLUMNS",
    "LOG_NAME",
    "TrainState",
    "iterate_batches",
    "stack_batch",
    "train",
]
