"""Shared helpers: logging, typing aliases, configuration loading, worker pools."""

from .config import load_run_config, parse_override
from .logging import get_logger
from .types import PrecisionName, SegmentationPredictor, Split
from .workers import max_workers

__all__ = [
    "get_logger",
    "load_run_config",
    "parse_override",
    "max_workers",
    "PrecisionName",
    "SegmentationPredictor",
    "Split",
]
