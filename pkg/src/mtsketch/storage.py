"""Binary matrix files and JSON helpers used for pipeline artifacts.

Matrix format: two little-endian uint64 (rows, cols) followed by the
entries as little-endian float64 in column-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

_HEADER = struct.Struct("<QQ")


def write_matrix(path, M) -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    rows, cols = M.shape
    Path(path).write_bytes(_HEADER.pack(rows, cols) + np.asfortranarray(M).astype("<f8").tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError(f"{path}: truncated matrix header")
    rows, cols = _HEADER.unpack_from(data, 0)
    if len(data) != _HEADER.size + 8 * rows * cols:
        raise ParseError(f"{path}: expected {rows}x{cols} float64 payload, got {len(data) - _HEADER.size} bytes")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return flat.reshape((rows, cols), order="F").astype(np.float64)


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
