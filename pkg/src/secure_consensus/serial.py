"""Canonical byte encoding of big integers.

Every integer is written as a 4-byte big-endian length followed by its
big-endian magnitude with no leading zero byte (zero is an empty magnitude).
"""

from __future__ import annotations

import struct

_LEN = struct.Struct(">I")


class DecodeError(ValueError):
    """Raised when a byte string is not a canonical encoding."""


def pack_int(value: int) -> bytes:
    if value < 0:
        raise ValueError("only non-negative integers are serialisable")
    raw = value.to_bytes((value.bit_length() + 7) // 8, "big")
    return _LEN.pack(len(raw)) + raw


def unpack_int(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode one integer at ``offset``; return ``(value, next_offset)``."""
    if len(data) - offset < _LEN.size:
        raise DecodeError("truncated integer length")
    (length,) = _LEN.unpack_from(data, offset)
    start = offset + _LEN.size
    end = start + length
    if end > len(data):
        raise DecodeError("truncated integer magnitude")
    raw = data[start:end]
    if raw[:1] == b"\x00":
        raise DecodeError("non-canonical integer (leading zero byte)")
    return int.from_bytes(raw, "big"), end


def pack_ints(values) -> bytes:
    return b"".join(pack_int(v) for v in values)


def unpack_ints(data: bytes, count: int | None = None) -> list[int]:
    """Decode ``count`` integers (or all of ``data``) with no trailing bytes."""
    out: list[int] = []
    offset = 0
    while offset < len(data) and (count is None or len(out) < count):
        value, offset = unpack_int(data, offset)
        out.append(value)
    if offset != len(data):
        raise DecodeError("trailing bytes after integers")
    if count is not None and len(out) != count:
        raise DecodeError(f"expected {count} integers, got {len(out)}")
    return out
