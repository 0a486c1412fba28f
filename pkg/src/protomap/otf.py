"""Binary tensor files carrying token grids, depth maps and embeddings.

Layout, all little-endian:

    offset 0   magic  b"OTF1"
    offset 4   dtype  u8 (0 = float32; the only code defined)
    offset 5   ndim   u8
    offset 6   shape  ndim x u32
    then       payload, row-major float32, product(shape) x 4 bytes

A zero shape product is a valid empty tensor. Malformed files raise
FormatError naming the byte offset of the problem.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"OTF1"
DTYPE_FLOAT32 = 0
_HEADER_FIXED = 6  # magic + dtype byte + ndim byte


def write_otf(path, tensor: np.ndarray) -> None:
    """Write a float32 tensor; other dtypes are converted."""
    arr = np.ascontiguousarray(np.asarray(tensor), dtype="<f4")
    if arr.ndim > 255:
        raise FormatError(f"cannot encode {arr.ndim} dimensions in one byte")
    header = MAGIC + struct.pack("<BB", DTYPE_FLOAT32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.tobytes())


def read_otf(path) -> np.ndarray:
    """Read a tensor file back; bit-exact round trip with write_otf."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER_FIXED:
        raise FormatError(f"{path}: truncated header at offset {len(raw)} (need {_HEADER_FIXED} bytes)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} at offset 0")
    dtype_code = raw[4]
    if dtype_code != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unknown dtype code {dtype_code} at offset 4")
    ndim = raw[5]

    shape_end = _HEADER_FIXED + 4 * ndim
    if len(raw) < shape_end:
        raise FormatError(f"{path}: truncated shape at offset {len(raw)} (need {shape_end} bytes)")
    shape = struct.unpack(f"<{ndim}I", raw[_HEADER_FIXED:shape_end])

    count = 1
    for s in shape:
        count *= s
    payload_end = shape_end + 4 * count
    if len(raw) < payload_end:
        raise FormatError(
            f"{path}: truncated payload at offset {len(raw)} "
            f"(payload starts at {shape_end}, needs {4 * count} bytes)"
        )
    if len(raw) > payload_end:
        raise FormatError(f"{path}: {len(raw) - payload_end} trailing bytes at offset {payload_end}")
    return np.frombuffer(raw, dtype="<f4", count=count, offset=shape_end).reshape(shape).copy()
