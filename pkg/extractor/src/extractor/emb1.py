"""Writer for the EMB1 embedding container.

This package only ever produces EMB1 files; reading and validation live
on the consumer side. Layout (little-endian, 24-byte header):

    offset 0   magic    4 bytes  "EMB1"
    offset 4   version  u16      1
    offset 6   dtype    u16      1 = float32
    offset 8   rows     u64
    offset 16  cols     u64
    offset 24  payload  rows*cols float32, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"EMB1"
VERSION = 1
DTYPE_F32 = 1
HEADER_STRUCT = struct.Struct("<4sHHQQ")


def write_emb1(matrix: np.ndarray, path) -> None:
    """Write a 2-D float array as an EMB1 file."""
    data = np.ascontiguousarray(matrix, dtype="<f4")
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise DataError(f"embedding matrix must be 2-D and non-empty, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise DataError("embedding matrix contains a non-finite value")
    header = HEADER_STRUCT.pack(MAGIC, VERSION, DTYPE_F32, data.shape[0], data.shape[1])
    Path(path).write_bytes(header + data.tobytes())
