"""Single-file binary checkpoints.

Layout, all little-endian:
  magic "FDSM" | version u32 | config-JSON length u64 + UTF-8 bytes |
  array count u32 | per array: name length u16 + UTF-8 name, rank u8,
  dims u32 each, float64 payload.

Readers fail loudly: wrong magic, unsupported version and truncation each
raise their own error type.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FDSM"
VERSION = 1


class CheckpointError(Exception):
    """Base class for unreadable checkpoint files."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


def save_checkpoint(path: str | Path, config: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write config and named float64 arrays; array order is preserved."""
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<Q", len(blob))
    out += blob
    out += struct.pack("<I", len(arrays))
    for name, arr in arrays.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"array name too long: '{name[:32]}...'")
        # asarray, not ascontiguousarray: the latter promotes rank-0 arrays
        # to rank 1, which would change shape across a round trip.  tobytes()
        # serializes in C order regardless of the input layout.
        arr = np.asarray(arr, dtype="<f8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            out += struct.pack("<I", dim)
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointTruncatedError(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint back; the inverse of :func:`save_checkpoint`."""
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(4)
    if magic != MAGIC:
        raise CheckpointMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported version {version}, expected {VERSION}")
    blob = reader.take(reader.u64())
    try:
        config = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointTruncatedError(f"config blob is unreadable: {exc}") from exc
    arrays: dict[str, np.ndarray] = {}
    count = reader.u32()
    for _ in range(count):
        name = reader.take(reader.u16()).decode("utf-8")
        rank = reader.u8()
        dims = tuple(reader.u32() for _ in range(rank))
        payload = reader.take(8 * int(np.prod(dims, dtype=np.int64)))
        arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    return config, arrays
