"""Tests for run configuration, worker sizing and logging helpers."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import pytest

from vilu_net.core.errors import ConfigError, ValidationError
from vilu_net.utils.config import load_run_config, parse_override, reject_unknown_keys
from vilu_net.utils.logging import (
    CLI_HANDLER_NAME,
    LOGGER_NAME,
    attach_stream_handler,
    get_logger,
)
from vilu_net.utils.workers import max_workers


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("train.lr=0.01", ("train", "lr", 0.01)),
        ("network.num_stages=3", ("network", "num_stages", 3)),
        ("train.clip_norm=null", ("train", "clip_norm", None)),
        ("train.precision=float64", ("train", "precision", "float64")),
        ("metrics.nsd_tolerance_mm=2", ("metrics", "nsd_tolerance_mm", 2)),
        ("network.name=a=b", ("network", "name", "a=b")),
    ],
)
def test_parse_override_decodes_json_values(text: str, expected: tuple[str, str, object]) -> None:
    """Values are JSON literals, falling back to plain strings."""
    assert parse_override(text) == expected


@pytest.mark.parametrize(
    ("text", "match"),
    [("train.lr", "section.key=value"), ("lr=1", "qualified"), ("optim.lr=1", "Unknown")],
)
def test_parse_override_rejects_malformed_text(text: str, match: str) -> None:
    """Overrides need a known section, a key and a value."""
    with pytest.raises(ConfigError, match=match):
        parse_override(text)


def test_overrides_apply_after_the_file_in_order(tmp_path: Path) -> None:
    """File values are replaced by overrides; the last override wins."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"train": {"lr": 0.1, "epochs": 4}}), "utf-8")
    merged = load_run_config(path, ["train.lr=0.2", "train.lr=0.3", "network.num_heads=2"])
    assert merged == {
        "network": {"num_heads": 2},
        "train": {"lr": 0.3, "epochs": 4},
        "metrics": {},
    }
    assert load_run_config(None) == {"network": {}, "train": {}, "metrics": {}}


@pytest.mark.parametrize(
    ("content", "match"),
    [
        (None, "not found"),
        ("{", "not valid JSON"),
        ("[1, 2]", "JSON object"),
        ('{"optim": {}}', "Unknown config sections"),
        ('{"train": 3}', "must be an object"),
    ],
)
def test_bad_config_files_raise_config_error(
    tmp_path: Path, content: str | None, match: str
) -> None:
    """Missing, malformed or mis-shaped files are reported."""
    path = tmp_path / "run.json"
    if content is not None:
        path.write_text(content, "utf-8")
    with pytest.raises(ConfigError, match=match):
        load_run_config(path)


def test_reject_unknown_keys_lists_them() -> None:
    """Only declared keys pass."""
    reject_unknown_keys({"a": 1}, ["a", "b"], "demo")
    with pytest.raises(ConfigError, match=r"Unknown demo keys: \['c', 'd'\]"):
        reject_unknown_keys({"a": 1, "d": 2, "c": 3}, ["a"], "demo")


def test_max_workers_reads_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """VILU_THREADS overrides the default cap and must be a positive integer."""
    monkeypatch.delenv("VILU_THREADS", raising=False)
    assert 1 <= max_workers() <= 4
    monkeypatch.setenv("VILU_THREADS", "7")
    assert max_workers() == 7
    for bad in ("0", "many"):
        monkeypatch.setenv("VILU_THREADS", bad)
        with pytest.raises(ValidationError, match="VILU_THREADS"):
            max_workers()


def test_loggers_are_children_of_the_package_logger() -> None:
    """get_logger namespaces every module under vilu_net."""
    assert get_logger().name == LOGGER_NAME
    assert get_logger("train.loop").name == f"{LOGGER_NAME}.train.loop"
    assert get_logger("vilu_net.train.loop") is get_logger("train.loop")


def test_stream_handler_is_attached_once() -> None:
    """Repeated CLI invocations do not stack handlers."""
    base = logging.getLogger(LOGGER_NAME)
    before = list(base.handlers)
    try:
        attach_stream_handler()
        attach_stream_handler()
        added = [h for h in base.handlers if h not in before]
        assert len(added) <= 1
        assert sum(h.get_name() == CLI_HANDLER_NAME for h in base.handlers) == 1
    finally:
        for handler in [h for h in base.handlers if h not in before]:
            base.removeHandler(handler)
