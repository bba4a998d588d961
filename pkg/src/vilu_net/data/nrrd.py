"""Reader and writer for a strict subset of the NRRD format.

Supported: magic ``NRRD0004``/``NRRD0005``, ``type`` short/float/uchar, 2-d or 3-d
``sizes``, axis-aligned ``space directions`` (or ``spacings``), ``endian`` and
``encoding`` raw/gzip. The payload is Fortran-ordered, so ``sizes: 2 3`` reads as an
array of shape ``(2, 3)``. Anything else raises a :class:`FormatError`.
"""

from __future__ import annotations

import gzip
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import cast

import numpy as np

from ..core.errors import FormatError, TruncationError, UnsupportedOrientationError
from ..utils.logging import get_logger
from .types import LabelMap, Volume

log = get_logger("data.nrrd")

MAGICS = ("NRRD0004", "NRRD0005")
ENCODINGS = ("raw", "gzip")

# canonical name -> numpy base dtype
TYPES: dict[str, np.dtype] = {
    "short": np.dtype(np.int16),
    "float": np.dtype(np.float32),
    "uchar": np.dtype(np.uint8),
}
_TYPE_ALIASES = {
    "short": "short",
    "short int": "short",
    "signed short": "short",
    "signed short int": "short",
    "int16": "short",
    "int16_t": "short",
    "float": "float",
    "uchar": "uchar",
    "unsigned char": "uchar",
    "uint8": "uchar",
    "uint8_t": "uchar",
}
_REQUIRED = ("type", "dimension", "sizes", "encoding")
_TOLERATED = (
    "endian",
    "space",
    "space dimension",
    "space directions",
    "space origin",
    "spacings",
    "kinds",
    "content",
    "space units",
    "labels",
)
_VECTOR = re.compile(r"\(([^)]*)\)|none")


@dataclass(frozen=True)
class NrrdHeader:
    """Parsed header fields of a supported file."""

    type: str
    sizes: tuple[int, ...]
    encoding: str
    endian: str
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    orientation: tuple[int, ...]
    fields: dict[str, str] = field(default_factory=dict)

    @property
    def dtype(self) -> np.dtype:
        base = TYPES[self.type]
        return base.newbyteorder("<" if self.endian == "little" else ">")

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.sizes)) * TYPES[self.type].itemsize


def _parse_vector(text: str, path: Path) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise FormatError(f"{path}: malformed vector ({text}).") from exc


def _directions(raw: str, rank: int, path: Path) -> tuple[tuple[float, ...], tuple[int, ...]]:
    vectors = [m.group(1) for m in _VECTOR.finditer(raw)]
    if len(vectors) != rank or any(v is None for v in vectors):
        raise FormatError(f"{path}: space directions must list {rank} vectors; got {raw!r}.")
    spacing, signs = [], []
    for axis, text in enumerate(vectors):
        vec = np.array(_parse_vector(text, path))
        if vec.size != rank:
            raise FormatError(
                f"{path}: direction {axis} has {vec.size} components; expected {rank}."
            )
        off_axis = np.delete(vec, axis)
        if vec[axis] == 0.0 or np.any(off_axis != 0.0):
            raise UnsupportedOrientationError(
                f"{path}: direction {axis} ({text}) is not axis-aligned with axis {axis}."
            )
        spacing.append(abs(float(vec[axis])))
        signs.append(1 if vec[axis] > 0 else -1)
    return tuple(spacing), tuple(signs)


def _split_header(blob: bytes, path: Path) -> tuple[list[str], bytes]:
    for separator in (b"\n\n", b"\r\n\r\n"):
        index = blob.find(separator)
        if index >= 0:
            head = blob[:index].decode("ascii", errors="replace")
            return head.splitlines(), blob[index + len(separator) :]
    raise TruncationError(f"{path}: header is not terminated by a blank line.")


def parse_header(lines: list[str], path: Path) -> NrrdHeader:
    if not lines or lines[0].strip() not in MAGICS:
        magic = lines[0].strip() if lines else ""
        raise FormatError(f"{path}: unsupported magic {magic!r}; expected one of {MAGICS}.")
    fields: dict[str, str] = {}
    for line in lines[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        if ":=" in line:
            continue  # key/value comments carry no geometry
        if ": " not in line:
            raise FormatError(f"{path}: malformed header line {line!r}.")
        key, value = line.split(": ", 1)
        key = key.strip().lower()
        if key not in _REQUIRED and key not in _TOLERATED:
            raise FormatError(f"{path}: unsupported header field {key!r}.")
        fields[key] = value.strip()
    missing = [key for key in _REQUIRED if key not in fields]
    if missing:
        raise FormatError(f"{path}: missing required fields {missing}.")

    type_name = _TYPE_ALIASES.get(fields["type"].lower())
    if type_name is None:
        raise FormatError(f"{path}: unsupported type {fields['type']!r}.")
    encoding = fields["encoding"].lower()
    if encoding == "gz":
        encoding = "gzip"
    if encoding not in ENCODINGS:
        raise FormatError(f"{path}: unsupported encoding {fields['encoding']!r}.")
    try:
        rank = int(fields["dimension"])
        sizes = tuple(int(s) for s in fields["sizes"].split())
    except ValueError as exc:
        raise FormatError(f"{path}: dimension and sizes must be integers.") from exc
    if rank not in (2, 3):
        raise FormatError(f"{path}: dimension must be 2 or 3; got {rank}.")
    if len(sizes) != rank or any(s <= 0 for s in sizes):
        raise FormatError(f"{path}: sizes {sizes} do not describe a {rank}-d grid.")
    endian = fields.get("endian", "little").lower()
    if endian not in ("little", "big"):
        raise FormatError(f"{path}: unsupported endian {endian!r}.")
    if "endian" not in fields and TYPES[type_name].itemsize > 1:
        raise FormatError(f"{path}: multi-byte type {type_name!r} needs an endian field.")

    if "space directions" in fields:
        spacing, orientation = _directions(fields["space directions"], rank, path)
    elif "spacings" in fields:
        spacing = _parse_vector(",".join(fields["spacings"].split()), path)
        if len(spacing) != rank:
            raise FormatError(f"{path}: spacings {spacing} do not match dimension {rank}.")
        spacing = tuple(abs(s) for s in spacing)
        orientation = (1,) * rank
    else:
        spacing, orientation = (1.0,) * rank, (1,) * rank
    origin = (0.0,) * rank
    if "space origin" in fields:
        origin = _parse_vector(fields["space origin"].strip().strip("()"), path)
    return NrrdHeader(
        type=type_name,
        sizes=sizes,
        encoding=encoding,
        endian=endian,
        spacing=spacing,
        origin=origin,
        orientation=orientation,
        fields=fields,
    )


def read_nrrd_array(path: str | Path) -> tuple[NrrdHeader, np.ndarray]:
    """Decode header and payload; the array keeps the stored element type."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"Cannot read {path}: {exc}") from exc
    lines, payload = _split_header(blob, path)
    header = parse_header(lines, path)
    if header.encoding == "gzip":
        try:
            payload = gzip.decompress(payload)
        except (OSError, EOFError, zlib.error) as exc:
            raise TruncationError(f"{path}: gzip payload is corrupt or truncated: {exc}") from exc
    if len(payload) != header.nbytes:
        raise TruncationError(
            f"{path}: payload has {len(payload)} bytes; sizes {header.sizes} of type "
            f"{header.type} need {header.nbytes}."
        )
    data = np.frombuffer(payload, dtype=header.dtype).reshape(header.sizes, order="F")
    log.debug("read %s type=%s sizes=%s", path, header.type, header.sizes)
    return header, data.astype(TYPES[header.type], copy=True)


def read_nrrd(
    path: str | Path, *, labels: bool = False, num_classes: int | None = None
) -> Volume | LabelMap:
    """
    Read a supported NRRD file.

    Parameters
    ----------
    labels:
        Return a :class:`LabelMap` instead of a :class:`Volume`.
    num_classes:
        Class count of a label map; defaults to ``max(label) + 1``.
    """
    header, data = read_nrrd_array(path)
    geometry = {
        "spacing": header.spacing,
        "origin": header.origin,
        "orientation": header.orientation,
        "storage_type": header.type,
        "content": header.fields.get("content"),
    }
    if labels:
        classes = num_classes if num_classes is not None else max(int(data.max()) + 1, 2)
        return LabelMap(data=data.astype(np.int64), num_classes=classes, **geometry)
    return Volume(data=data.astype(np.float32), **geometry)


def read_label_nrrd(path: str | Path, num_classes: int | None = None) -> LabelMap:
    return cast(LabelMap, read_nrrd(path, labels=True, num_classes=num_classes))


def _format_number(value: float) -> str:
    number = float(value)
    return str(int(number)) if number.is_integer() else repr(number)


def write_nrrd(
    path: str | Path,
    image: Volume | LabelMap,
    *,
    encoding: str = "raw",
    storage_type: str | None = None,
) -> Path:
    """Write ``image`` little-endian; ``storage_type`` defaults to the type it was read with."""
    if encoding not in ENCODINGS:
        raise FormatError(f"unsupported encoding {encoding!r}; expected one of {ENCODINGS}.")
    type_name = storage_type or image.storage_type
    if type_name is None:
        if isinstance(image, LabelMap):
            type_name = "uchar" if image.num_classes <= 256 else "short"
        else:
            type_name = "float"
    if type_name not in TYPES:
        raise FormatError(f"unsupported type {type_name!r}; expected one of {sorted(TYPES)}.")
    rank = image.data.ndim
    directions = []
    for axis in range(rank):
        vec = ["0"] * rank
        vec[axis] = _format_number(image.orientation[axis] * image.spacing[axis])
        directions.append("(" + ",".join(vec) + ")")
    lines = [
        MAGICS[0],
        f"type: {type_name}",
        f"dimension: {rank}",
        f"space dimension: {rank}",
        "sizes: " + " ".join(str(n) for n in image.data.shape),
        "space directions: " + " ".join(directions),
        "kinds: " + " ".join(["domain"] * rank),
        "endian: little",
        f"encoding: {encoding}",
        "space origin: (" + ",".join(_format_number(o) for o in image.origin) + ")",
    ]
    if image.content:
        lines.append(f"content: {image.content}")
    dtype = TYPES[type_name].newbyteorder("<")
    payload = np.asarray(image.data).astype(dtype).tobytes(order="F")
    if encoding == "gzip":
        payload = gzip.compress(payload, mtime=0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(("\n".join(lines) + "\n\n").encode("ascii") + payload)
    log.debug("wrote %s type=%s encoding=%s", path, type_name, encoding)
    return path


__all__ = [
    "MAGICS",
    "TYPES",
    "NrrdHeader",
    "parse_header",
    "read_label_nrrd",
    "read_nrrd",
    "read_nrrd_array",
    "write_nrrd",
]
