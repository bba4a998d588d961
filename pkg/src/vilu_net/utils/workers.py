"""Worker-pool sizing shared by data loading and evaluation."""

from __future__ import annotations

import os

from ..core.validate import ensure_positive_int

_ENV_VAR = "VILU_THREADS"


def max_workers() -> int:
    """Return the worker cap from ``VILU_THREADS`` or ``min(4, cpu_count)``."""
    raw = os.getenv(_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = -1
        ensure_positive_int(value, _ENV_VAR)
        return value
    return max(1, min(4, os.cpu_count() or 1))


__all__ = ["max_workers"]
