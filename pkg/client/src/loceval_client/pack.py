"""Scorepack writer.

The format is the evaluator's native score-map container, reproduced here
byte for byte so exports never depend on having the evaluator importable
inside a training job. Layout (all little-endian):

    magic b"WSEP" | u16 version=1 | u16 flags=0 | u64 record_count
    per record: u16 id_len | id (UTF-8) | u32 height | u32 width
                | height*width float32, row-major

Values are stored as float32 regardless of the input dtype.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Tuple

import numpy as np

from .errors import PackWriteError

PACK_MAGIC = b"WSEP"
PACK_VERSION = 1

_HEADER = struct.Struct("<4sHHQ")
_ID_LEN = struct.Struct("<H")
_DIMS = struct.Struct("<II")


def write_scorepack(items: Iterable[Tuple[str, np.ndarray]], path) -> None:
    """Write ``(image_id, 2-D array)`` pairs to ``path`` as a scorepack.

    The record count is patched into the header after the stream is
    exhausted, so ``items`` may be a generator. Raises PackWriteError for
    duplicate ids, non-2-D arrays, and values that are not finite once
    converted to float32.
    """
    path = Path(path)
    seen = set()
    count = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PACK_MAGIC, PACK_VERSION, 0, 0))
        for image_id, array in items:
            if not isinstance(image_id, str) or not image_id:
                raise PackWriteError(f"image id must be a non-empty str, got {image_id!r}")
            if image_id in seen:
                raise PackWriteError(f"duplicate image id {image_id!r}")
            seen.add(image_id)
            with np.errstate(over="ignore", invalid="ignore"):
                values = np.ascontiguousarray(array, dtype="<f4")
            if values.ndim != 2:
                raise PackWriteError(
                    f"{image_id}: expected a 2-D array, got shape {values.shape}"
                )
            if not np.isfinite(values).all():
                raise PackWriteError(f"{image_id}: refusing to write non-finite values")
            id_bytes = image_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise PackWriteError(f"image id too long ({len(id_bytes)} bytes)")
            fh.write(_ID_LEN.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(_DIMS.pack(values.shape[0], values.shape[1]))
            fh.write(values.tobytes())
            count += 1
        fh.seek(8)  # record_count sits after magic + version + flags
        fh.write(struct.pack("<Q", count))
