"""Adam training loop, checkpointed state and evaluation."""

from .config import TrainConfig
from .evaluate import (
    EvaluationSummary,
    evaluate,
    evaluate_directories,
    foreground_dsc,
    mean_foreground_dsc,
    predict_sample,
)
from .loop import LOG_COLUMNS, TrainState, iterate_batches, stack_batch, train
from .optim import AdamState, adam_step, clip_gradients, global_grad_norm

__all__ = [
    "LOG_COLUMNS",
    "AdamState",
    "EvaluationSummary",
    "TrainConfig",
    "TrainState",
    "adam_step",
    "clip_gradients",
    "evaluate",
    "evaluate_directories",
    "foreground_dsc",
    "global_grad_norm",
    "iterate_batches",
    "mean_foreground_dsc",
    "predict_sample",
    "stack_batch",
    "train",
]
