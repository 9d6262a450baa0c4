"""Versioned binary model files.

Layout: 8-byte magic ``HELIOX01``, an 8-byte little-endian header length,
a UTF-8 JSON header (learner kind, input combo, shapes, seeds, metadata and
the parameter block table), then the raw parameter blocks in header order,
little-endian, C-contiguous.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .forest import ForestRegressor
from .lstm import LstmRegressor
from .nnet import MlpRegressor

MAGIC = b"HELIOX01"
MAGIC_PREFIX = b"HELIOX"
FORMAT_VERSION = 1

_KINDS = {"forest": ForestRegressor, "mlp": MlpRegressor, "lstm": LstmRegressor}


class BadMagic(ValueError):
    pass


class VersionUnsupported(ValueError):
    pass


class Truncated(ValueError):
    pass


@dataclass(frozen=True)
class TrainedModel:
    """Immutable learner artifact plus its provenance metadata."""

    kind: str  # forest | mlp | lstm
    combo: str  # input combo value
    model: object
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")


def _dtype_tag(a: np.ndarray) -> str:
    return np.dtype(a.dtype).str.lstrip("<")  # e.g. f8, i8


def save_model(trained: TrainedModel, path) -> None:
    blocks = trained.model.parameter_blocks()
    header = {
        "format_version": FORMAT_VERSION,
        "kind": trained.kind,
        "combo": trained.combo,
        "shapes": trained.model.shape_header(),
        "metadata": trained.metadata,
        "blocks": [
            {"name": name, "dtype": _dtype_tag(arr), "shape": list(arr.shape)}
            for name, arr in blocks
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 8:
        raise Truncated("file shorter than the fixed preamble")
    magic = data[: len(MAGIC)]
    if magic != MAGIC:
        if magic.startswith(MAGIC_PREFIX):
            raise VersionUnsupported(f"unsupported format {magic!r}")
        raise BadMagic(f"not a model file (magic {magic!r})")
    (header_len,) = struct.unpack("<Q", data[len(MAGIC) : len(MAGIC) + 8])
    body_start = len(MAGIC) + 8 + header_len
    if len(data) < body_start:
        raise Truncated("incomplete header")
    try:
        header = json.loads(data[len(MAGIC) + 8 : body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadMagic(f"unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionUnsupported(f"format version {header.get('format_version')!r}")

    blocks = {}
    offset = body_start
    for spec in header["blocks"]:
        dtype = np.dtype("<" + spec["dtype"])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(data):
            raise Truncated(f"block {spec['name']!r} runs past end of file")
        arr = np.frombuffer(data[offset : offset + nbytes], dtype=dtype).reshape(spec["shape"])
        blocks[spec["name"]] = arr.astype(dtype.newbyteorder("="))
        offset += nbytes
    if offset != len(data):
        raise Truncated("trailing bytes after the declared parameter blocks")

    model = _KINDS[header["kind"]].from_blocks(header["shapes"], blocks)
    return TrainedModel(
        kind=header["kind"],
        combo=header["combo"],
        model=model,
        metadata=header["metadata"],
    )
