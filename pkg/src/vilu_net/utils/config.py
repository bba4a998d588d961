"""JSON run configuration with ``section.key=value`` overrides."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from ..core.errors import ConfigError

SECTIONS = ("network", "train", "metrics")


def parse_override(text: str) -> tuple[str, str, Any]:
    """Split ``"section.key=value"`` into its parts.

    The value is decoded as a JSON literal (``8``, ``0.01``, ``true``, ``[1, 1]``); anything
    that is not valid JSON is kept as a plain string.
    """
    if "=" not in text:
        raise ConfigError(f"Override '{text}' must look like section.key=value.")
    dotted, raw = text.split("=", 1)
    if "." not in dotted:
        raise ConfigError(f"Override key '{dotted}' must be qualified, e.g. train.lr.")
    section, key = dotted.split(".", 1)
    if section not in SECTIONS:
        raise ConfigError(f"Unknown config section '{section}'; expected one of {SECTIONS}.")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return section, key, value


def load_run_config(
    path: str | Path | None,
    overrides: Iterable[str] = (),
) -> dict[str, dict[str, Any]]:
    """Read a run config file and apply overrides in order (last one wins)."""
    merged: dict[str, dict[str, Any]] = {section: {} for section in SECTIONS}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, Mapping):
            raise ConfigError(f"Config file {path} must hold a JSON object.")
        unknown = set(raw) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown config sections: {sorted(unknown)}")
        for section, values in raw.items():
            if not isinstance(values, Mapping):
                raise ConfigError(f"Config section '{section}' must be an object.")
            merged[section].update(values)
    for text in overrides:
        section, key, value = parse_override(text)
        merged[section][key] = value
    return merged


def reject_unknown_keys(values: Mapping[str, Any], allowed: Iterable[str], what: str) -> None:
    """Raise :class:`ConfigError` listing keys that ``what`` does not define."""
    unknown = set(values) - set(allowed)
    if unknown:
        raise ConfigError(f"Unknown {what} keys: {sorted(unknown)}")


__all__ = ["SECTIONS", "parse_override", "load_run_config", "reject_unknown_keys"]
