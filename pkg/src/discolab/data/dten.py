"""DTEN: a minimal little-endian float32 tensor file.

Layout: b"DTEN", u32 version (=1), u32 rank, rank x u32 dims, then
prod(dims) float32 values in row-major order.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"DTEN"
VERSION = 1


class DtenError(ValueError):
    pass


def encode(arr) -> bytes:
    arr = np.asarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def decode(buf: bytes) -> np.ndarray:
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise DtenError("bad magic")
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise DtenError(f"unsupported DTEN version {version}")
    off = 12 + 4 * rank
    if len(buf) < off:
        raise DtenError("truncated header")
    dims = struct.unpack_from(f"<{rank}I", buf, 12)
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(buf) != off + 4 * count:
        raise DtenError(f"payload is {len(buf) - off} bytes, expected {4 * count}")
    return np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(dims).astype(np.float32)


def save(arr, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(arr))


def load(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())
