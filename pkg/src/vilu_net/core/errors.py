"""Custom exception hierarchy for vilu-net."""

from __future__ import annotations


class ViluError(Exception):
    """Base exception for library-specific errors."""


class ValidationError(ValueError, ViluError):
    """Raised when input validation fails."""


class ConfigError(ValidationError):
    """Raised when a network, training or CLI configuration is invalid."""


class DimensionError(ValidationError):
    """Raised when tensor or array shapes are incompatible."""


class EmptySequenceError(DimensionError):
    """Raised when a token sequence has no elements."""


class LabelError(ValidationError):
    """Raised when a label map holds class indices outside ``[0, num_classes)``."""


class ContractError(RuntimeError, ViluError):
    """Raised when an API is called outside its contract."""


class NumericError(ArithmeticError, ViluError):
    """Raised when a computation produces NaN or infinite values."""


class DataError(OSError, ViluError):
    """Base class for failures reading, writing or generating data."""


class FormatError(DataError):
    """Raised for malformed or unsupported file contents."""


class TruncationError(FormatError):
    """Raised when a payload is shorter or longer than its header declares."""


class UnsupportedOrientationError(FormatError):
    """Raised for volumes whose axes are not aligned with the index grid."""


class ResampleError(DataError):
    """Raised when resampling would produce a degenerate grid."""


class GenerationError(DataError):
    """Raised when the synthetic generator cannot satisfy its constraints."""


class ManifestError(DataError):
    """Raised for missing or inconsistent dataset manifests."""


class CheckpointError(DataError):
    """Raised when a checkpoint cannot be read or does not match a model."""
