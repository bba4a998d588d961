"""Single-file checkpoint container.

Layout::

    b"VILUCKPT" | header length (uint64, little-endian) | JSON header | payload

The header holds the network config, free-form metadata and a tensor manifest
(``name``, ``shape``, ``dtype``, ``offset``, ``nbytes``); offsets count from the
start of the payload, which stores each array as little-endian raw bytes.
"""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..core.errors import CheckpointError, ConfigError
from ..utils.logging import get_logger
from .config import NetworkConfig
from .vilu import ViLUNet

log = get_logger("model.checkpoint")

MAGIC = b"VILUCKPT"
FORMAT_VERSION = 1
_LENGTH_BYTES = 8


@dataclass(frozen=True)
class Checkpoint:
    """Decoded checkpoint: network config, named arrays and metadata."""

    network: NetworkConfig
    tensors: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)

    def prefixed(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays whose names start with ``prefix``, with the prefix removed."""
        return {
            name[len(prefix) :]: array
            for name, array in self.tensors.items()
            if name.startswith(prefix)
        }

    def model_state(self) -> dict[str, np.ndarray]:
        return self.prefixed("model.")


def write_checkpoint(path: str | Path, checkpoint: Checkpoint) -> Path:
    """Write atomically: the target is replaced only after the full file is on disk."""
    path = Path(path)
    manifest = []
    chunks = []
    offset = 0
    for name, array in checkpoint.tensors.items():
        byte_order = np.asarray(array).dtype.newbyteorder("<")
        little = np.require(array, dtype=byte_order, requirements="C")
        raw = little.tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(little.shape),
                "dtype": little.dtype.str,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "network": checkpoint.network.to_dict(),
        "metadata": checkpoint.metadata,
        "tensors": manifest,
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(len(encoded).to_bytes(_LENGTH_BYTES, "little"))
        fh.write(encoded)
        for raw in chunks:
            fh.write(raw)
    os.replace(tmp, path)
    log.info("Wrote checkpoint %s (%d tensors, %d bytes)", path, len(manifest), offset)
    return path


def read_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"Cannot read checkpoint {path}: {exc}") from exc
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic).")
    start = len(MAGIC) + _LENGTH_BYTES
    if len(blob) < start:
        raise CheckpointError(f"{path} is truncated inside the header length.")
    length = int.from_bytes(blob[len(MAGIC) : start], "little")
    if len(blob) < start + length:
        raise CheckpointError(f"{path} is truncated inside the JSON header.")
    try:
        header = json.loads(blob[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has format version {header.get('format_version')!r}; "
            f"expected {FORMAT_VERSION}."
        )
    payload = memoryview(blob)[start + length :]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(payload):
            raise CheckpointError(f"{path} is truncated inside tensor {entry['name']!r}.")
        array = np.frombuffer(payload[lo:hi], dtype=np.dtype(entry["dtype"]))
        tensors[entry["name"]] = array.reshape(entry["shape"]).astype(
            array.dtype.newbyteorder("="), copy=True
        )
    try:
        network = NetworkConfig.from_dict(header["network"])
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"{path} holds an invalid network config: {exc}") from exc
    return Checkpoint(network=network, tensors=tensors, metadata=header.get("metadata", {}))


def save_model(
    path: str | Path,
    model: ViLUNet,
    *,
    extra: Mapping[str, np.ndarray] | None = None,
    metadata: Mapping[str, Any] | None = None,
) -> Path:
    """Store ``model`` parameters (as ``model.<name>``) plus any ``extra`` arrays."""
    tensors = {f"model.{name}": array for name, array in model.state_dict().items()}
    tensors.update(extra or {})
    return write_checkpoint(
        path, Checkpoint(network=model.config, tensors=tensors, metadata=dict(metadata or {}))
    )


def load_model(path: str | Path) -> tuple[ViLUNet, Checkpoint]:
    """Rebuild the network from the stored config and load its parameters strictly."""
    checkpoint = read_checkpoint(path)
    model = ViLUNet(checkpoint.network)
    state = checkpoint.model_state()
    if state:
        dtype = next(iter(state.values())).dtype
        if dtype == np.float64:
            model.to_precision("float64")
    model.load_state_dict(state)
    return model, checkpoint


__all__ = [
    "MAGIC",
    "Checkpoint",
    "write_checkpoint",
    "read_checkpoint",
    "save_model",
    "load_model",
]
