"""Flat binary checkpoint format.

Layout, all integers little-endian unsigned 32-bit::

    magic   4 bytes  b"A3CK"
    version u32      currently 1
    count   u32      number of tensors
    then per tensor:
      name_len u32, name (utf-8), rank u32, dims u32 * rank,
      payload  float64 little-endian, row-major, prod(dims) values
"""
from __future__ import annotations

import os
import struct
from typing import Mapping

import numpy as np

from a3ps.errors import ParseError

MAGIC = b"A3CK"
VERSION = 1


def save_tensors(path: str | os.PathLike, tensors: Mapping[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_tensors(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ParseError(f"{path}: not a checkpoint (bad magic {buf[:4]!r})")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off : off + n].decode("utf-8")
            off += n
            (rank,) = struct.unpack_from("<I", buf, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", buf, off)
            off += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(dims)
            off += 8 * size
            out[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise ParseError(f"{path}: truncated checkpoint ({exc})") from None
    return out
