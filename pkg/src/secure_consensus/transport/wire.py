"""Bit-exact packet framing.

Header (18 bytes, big-endian)::

    version:u8  msg_type:u8  round:u32  sender:u32  receiver:u32  body_len:u32

followed by ``body_len`` body bytes. Bodies:

* REQUEST: public key (``n``) then ciphertext (value + 8-byte fingerprint)
* RESPONSE: ciphertext
* SIGNED_WRAPPER: ``u16 len | verify_key | u16 len | cert | u32 len | sig | payload``
  where ``payload`` is a complete inner packet.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import BinaryIO

from ..paillier import Ciphertext, PaillierPublicKey
from ..serial import DecodeError, unpack_int

VERSION = 1
HEADER = struct.Struct(">BBIIII")
HEADER_SIZE = HEADER.size  # 18
MAX_BODY = 0xFFFFFFFF
U32_MAX = 0xFFFFFFFF


class MsgType(enum.IntEnum):
    REQUEST = 1
    RESPONSE = 2
    SIGNED_WRAPPER = 3


class FramingError(ValueError):
    pass


class VersionError(FramingError):
    pass


class LengthError(FramingError):
    pass


class MessageTypeError(FramingError):
    pass


@dataclass(frozen=True)
class Packet:
    msg_type: MsgType
    round: int
    sender: int
    receiver: int
    body: bytes = b""
    version: int = VERSION

    @property
    def body_len(self) -> int:
        return len(self.body)


def encode_packet(p: Packet) -> bytes:
    for name in ("round", "sender", "receiver"):
        value = getattr(p, name)
        if not 0 <= value <= U32_MAX:
            raise FramingError(f"{name}={value} does not fit in 4 bytes")
    if not 0 <= p.version <= 0xFF or not 0 <= int(p.msg_type) <= 0xFF:
        raise FramingError("version and msg_type are single bytes")
    if len(p.body) > MAX_BODY:
        raise LengthError("body too large for a 4-byte length")
    header = HEADER.pack(p.version, int(p.msg_type), p.round, p.sender, p.receiver, len(p.body))
    return header + p.body


def _check_header(version: int, msg_type: int) -> MsgType:
    if version != VERSION:
        raise VersionError(f"unsupported version {version:#04x}")
    try:
        return MsgType(msg_type)
    except ValueError:
        raise MessageTypeError(f"unknown msg_type {msg_type}") from None


def decode_packet(data: bytes) -> Packet:
    if len(data) < HEADER_SIZE:
        raise FramingError(f"truncated header: {len(data)} < {HEADER_SIZE} bytes")
    version, msg_type, rnd, sender, receiver, body_len = HEADER.unpack_from(data)
    kind = _check_header(version, msg_type)
    if len(data) != HEADER_SIZE + body_len:
        raise LengthError(f"body_len={body_len} but {len(data) - HEADER_SIZE} body bytes present")
    return Packet(kind, rnd, sender, receiver, bytes(data[HEADER_SIZE:]), version)


def read_packet(stream: BinaryIO) -> Packet | None:
    """Read one frame from a byte stream; ``None`` on clean EOF."""
    header = _read_exact(stream, HEADER_SIZE)
    if header is None:
        return None
    *_, body_len = HEADER.unpack(header)
    body = _read_exact(stream, body_len) if body_len else b""
    if body is None:
        raise FramingError("stream closed mid-frame")
    return decode_packet(header + body)


def _read_exact(stream: BinaryIO, size: int) -> bytes | None:
    chunks = []
    remaining = size
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            if remaining == size:
                return None
            raise FramingError("stream closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


# -- message bodies ---------------------------------------------------------


def encode_request_body(public_key: PaillierPublicKey, payload: Ciphertext) -> bytes:
    return public_key.to_bytes() + payload.to_bytes()


def decode_request_body(body: bytes) -> tuple[PaillierPublicKey, Ciphertext]:
    try:
        n, offset = unpack_int(body)
        pk = PaillierPublicKey(n)
        return pk, Ciphertext.from_bytes(body[offset:], pk)
    except DecodeError as exc:
        raise FramingError(f"malformed request body: {exc}") from exc


def encode_response_body(payload: Ciphertext) -> bytes:
    return payload.to_bytes()


def decode_response_body(body: bytes, public_key: PaillierPublicKey) -> Ciphertext:
    try:
        return Ciphertext.from_bytes(body, public_key)
    except DecodeError as exc:
        raise FramingError(f"malformed response body: {exc}") from exc


_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")


def encode_envelope_body(verify_key: bytes, cert: bytes, sig: bytes, payload: bytes) -> bytes:
    if len(verify_key) > 0xFFFF or len(cert) > 0xFFFF:
        raise LengthError("verify key and certificate are limited to 65535 bytes")
    return b"".join(
        (
            _U16.pack(len(verify_key)),
            verify_key,
            _U16.pack(len(cert)),
            cert,
            _U32.pack(len(sig)),
            sig,
            payload,
        )
    )


def decode_envelope_body(body: bytes) -> tuple[bytes, bytes, bytes, bytes]:
    """Split a SIGNED_WRAPPER body into ``(verify_key, cert, sig, payload)``."""
    fields = []
    offset = 0
    for fmt in (_U16, _U16, _U32):
        if len(body) - offset < fmt.size:
            raise LengthError("truncated envelope")
        (length,) = fmt.unpack_from(body, offset)
        offset += fmt.size
        if len(body) - offset < length:
            raise LengthError("truncated envelope field")
        fields.append(body[offset : offset + length])
        offset += length
    fields.append(body[offset:])
    return tuple(fields)  # type: ignore[return-value]
