"""Tensor file I/O.

Binary ".ten" layout: magic "TEN1", u32 rank, rank x u64 extents, then the
row-major little-endian float64 payload. CSV import/export covers rank <= 2.
All writes go through a temp-file-then-rename so readers never observe a
partial file.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from bioattn.errors import ShapeError

MAGIC = b"TEN1"


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_ten(path, array) -> None:
    arr = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    atomic_write_bytes(path, header + arr.astype("<f8").tobytes())


def load_ten(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a .ten file (bad magic)")
    (rank,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    shape = struct.unpack_from(f"<{rank}Q", raw, offset)
    offset += 8 * rank
    count = int(np.prod(shape)) if rank else 1
    expected = offset + 8 * count
    if len(raw) != expected:
        raise ValueError(f"{path}: payload length {len(raw)} != expected {expected}")
    flat = np.frombuffer(raw, dtype="<f8", offset=offset, count=count)
    return flat.astype(np.float64).reshape(shape)


def save_csv(path, array) -> None:
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim > 2:
        raise ShapeError(f"CSV export supports rank <= 2, got rank {arr.ndim}")
    rows = arr.reshape(1, -1) if arr.ndim < 2 else arr
    lines = [",".join(repr(float(v)) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_csv(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    rows = [[float(v) for v in ln.split(",")] for ln in lines]
    arr = np.array(rows, dtype=np.float64)
    return arr[0] if arr.shape[0] == 1 else arr
