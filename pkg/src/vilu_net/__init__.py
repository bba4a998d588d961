"""ViLU-Net: a U-shaped segmentation network with Vision-LSTM stages, built on numpy."""

__version__ = "0.1.0"

from .autodiff import Module, Tensor, backward, no_grad, precision
from .core.errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DimensionError,
    LabelError,
    NumericError,
    ValidationError,
    ViluError,
)
from .data import LabelMap, Sample, Volume, read_nrrd, synth_dataset, write_nrrd
from .metrics import MetricsReport, combined_loss, evaluate_case
from .model import NetworkConfig, ViLUNet, load_model, save_model
from .train import TrainConfig, evaluate, train

__all__ = [
    "__version__",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "DimensionError",
    "LabelError",
    "LabelMap",
    "MetricsReport",
    "Module",
    "NetworkConfig",
    "NumericError",
    "Sample",
    "Tensor",
    "TrainConfig",
    "ValidationError",
    "ViLUNet",
    "ViluError",
    "Volume",
    "backward",
    "combined_loss",
    "evaluate",
    "evaluate_case",
    "load_model",
    "no_grad",
    "precision",
    "read_nrrd",
    "save_model",
    "synth_dataset",
    "train",
    "write_nrrd",
]
