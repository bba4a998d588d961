"""Core utilities such as exceptions and validators."""

from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    EmptySequenceError,
    FormatError,
    GenerationError,
    LabelError,
    ManifestError,
    NumericError,
    ResampleError,
    TruncationError,
    UnsupportedOrientationError,
    ValidationError,
    ViluError,
)
from .validate import (
    ensure_divisible,
    ensure_finite,
    ensure_non_negative,
    ensure_positive,
    ensure_positive_int,
    ensure_probability,
    ensure_same_shape,
    require_columns,
)

__all__ = [
    "ViluError",
    "ValidationError",
    "ConfigError",
    "DimensionError",
    "EmptySequenceError",
    "LabelError",
    "ContractError",
    "NumericError",
    "DataError",
    "FormatError",
    "TruncationError",
    "UnsupportedOrientationError",
    "ResampleError",
    "GenerationError",
    "ManifestError",
    "CheckpointError",
    "require_columns",
    "ensure_positive",
    "ensure_non_negative",
    "ensure_positive_int",
    "ensure_probability",
    "ensure_finite",
    "ensure_same_shape",
    "ensure_divisible",
]
