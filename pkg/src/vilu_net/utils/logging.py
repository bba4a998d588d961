"""Package logger for vilu_net.

Library modules log through ``get_logger`` and stay silent unless the host
application configures handlers. The ``vilu`` command attaches a single stderr
handler. ``LOG_LEVEL`` accepts a level name (``DEBUG``) or a number (``10``).
"""

from __future__ import annotations

import logging
import os

LOGGER_NAME = "vilu_net"
CLI_HANDLER_NAME = "vilu-cli"
_LEVEL_ENV = "LOG_LEVEL"
_CLI_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _level_from_env() -> int:
    raw = os.getenv(_LEVEL_ENV, "").strip()
    if raw.isdigit():
        return int(raw)
    level = logging.getLevelName(raw.upper()) if raw else None
    return level if isinstance(level, int) else logging.INFO


_root = logging.getLogger(LOGGER_NAME)
_root.setLevel(_level_from_env())
_root.addHandler(logging.NullHandler())


def get_logger(name: str | None = None) -> logging.Logger:
    """
    Return the package logger or one of its children.

    ``name`` is a dotted suffix such as ``"train.loop"``; a full module path
    (``__name__``) is accepted too and maps to the same logger.
    """
    if not name or name == LOGGER_NAME:
        return _root
    return _root.getChild(name.removeprefix(f"{LOGGER_NAME}."))


def attach_stream_handler(verbose: bool = False) -> None:
    """Send package records to stderr. Calling it again is a no-op."""
    if not any(h.get_name() == CLI_HANDLER_NAME for h in _root.handlers):
        handler = logging.StreamHandler()
        handler.set_name(CLI_HANDLER_NAME)
        handler.setFormatter(logging.Formatter(_CLI_FORMAT))
        _root.addHandler(handler)
    if verbose:
        _root.setLevel(logging.DEBUG)


__all__ = ["CLI_HANDLER_NAME", "LOGGER_NAME", "attach_stream_handler", "get_logger"]
