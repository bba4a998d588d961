from .checkpoint import Checkpoint, load_model, read_checkpoint, save_model, write_checkpoint
from .config import NetworkConfig
from .layers import ConvNormAct, SegmentationHead, UpSampler
from .vilu import FeaturePyramid, ViLStage, ViLUNet, flatten_tokens, unflatten_tokens

__all__ = [
    "Checkpoint",
    "ConvNormAct",
    "FeaturePyramid",
    "NetworkConfig",
    "SegmentationHead",
    "UpSampler",
    "ViLStage",
    "ViLUNet",
    "flatten_tokens",
    "load_model",
    "read_checkpoint",
    "save_model",
    "unflatten_tokens",
    "write_checkpoint",
]
