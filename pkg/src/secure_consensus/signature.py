"""Message-integrity envelopes: hash-then-encrypt with an auxiliary key pair.

The sender keeps the *encryption* half of an auxiliary key pair private and
ships the *decryption* half (the verify key) with every message. A recipient
decrypts the signature blocks, recomputes ``digest(payload)`` and accepts
only if ``digest || cert`` matches.

Two instantiations are provided:

``TrapdoorSigner`` (default)
    RSA-style trapdoor permutation. The verify key ``(e, n)`` does not reveal
    the encryption exponent ``d``, so an attacker holding only wire contents
    cannot re-sign a modified payload.

``PaillierLiteralSigner``
    The auxiliary pair is a Paillier key pair used exactly as described: the
    "private" encryption key is ``(n, g)`` and the verify key is
    ``(lambda, mu, n)``. Because ``g = n + 1`` and ``n`` travels inside the
    verify key, anyone can encrypt, so envelopes are forgeable. Kept only to
    demonstrate that weakness; see ``adversary.forge_envelope``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from math import gcd

from . import kernels
from .paillier import Ciphertext, PaillierPrivateKey, PaillierPublicKey, decrypt, encrypt, keygen
from .primes import modinv, random_prime
from .serial import DecodeError, pack_ints, unpack_ints
from .transport.wire import (
    FramingError,
    MsgType,
    Packet,
    decode_envelope_body,
    decode_packet,
    encode_envelope_body,
    encode_packet,
)

DIGEST_SIZE = 32
MAX_CERT = 1024
RSA_EXPONENT = 65537

TAG_TRAPDOOR = 0x01
TAG_PAILLIER = 0x02


class IntegrityError(ValueError):
    """An envelope failed verification."""


def digest(m: bytes) -> bytes:
    """SHA-256 of ``m``."""
    return hashlib.sha256(m).digest()


@dataclass(frozen=True)
class SignedEnvelope:
    payload: bytes
    verify_key: bytes
    sig: bytes
    cert: bytes


def _blocks(data: bytes, modulus: int) -> list[int]:
    size = (modulus.bit_length() - 1) // 8
    if size < 1:
        raise ValueError("auxiliary modulus too small to carry a block")
    return [int.from_bytes(data[i : i + size], "big") for i in range(0, len(data), size)]


def _signed_material(payload: bytes, cert: bytes) -> bytes:
    return digest(payload) + cert


class TrapdoorSigner:
    """Auxiliary RSA-style pair; ``d`` never leaves the sender."""

    scheme = "trapdoor"

    def __init__(self, n: int, e: int, d: int):
        self.n, self.e, self.d = n, e, d

    @classmethod
    def generate(cls, bits: int, rng: random.Random) -> "TrapdoorSigner":
        half = bits // 2
        while True:
            p, q = random_prime(half, rng), random_prime(bits - half, rng)
            if p == q:
                continue
            lam = (p - 1) * (q - 1) // gcd(p - 1, q - 1)
            if gcd(RSA_EXPONENT, lam) == 1:
                return cls(p * q, RSA_EXPONENT, modinv(RSA_EXPONENT, lam))

    @property
    def verify_key(self) -> bytes:
        return bytes([TAG_TRAPDOOR]) + pack_ints((self.e, self.n))

    def sign(self, payload: bytes, cert: bytes) -> SignedEnvelope:
        blocks = _blocks(_signed_material(payload, cert), self.n)
        sig = pack_ints(kernels.powmod(b, self.d, self.n) for b in blocks)
        return SignedEnvelope(payload, self.verify_key, sig, cert)


class PaillierLiteralSigner:
    """Paillier used as the auxiliary scheme, exactly as literally described."""

    scheme = "paillier-literal"

    def __init__(self, public: PaillierPublicKey, private: PaillierPrivateKey, rng: random.Random):
        self.public, self.private, self.rng = public, private, rng

    @classmethod
    def generate(cls, bits: int, rng: random.Random) -> "PaillierLiteralSigner":
        pk, sk = keygen(bits, rng)
        return cls(pk, sk, rng)

    @property
    def verify_key(self) -> bytes:
        sk = self.private
        return bytes([TAG_PAILLIER]) + pack_ints((sk.lam, sk.mu, sk.n))

    def sign(self, payload: bytes, cert: bytes) -> SignedEnvelope:
        blocks = _blocks(_signed_material(payload, cert), self.public.n)
        sig = pack_ints(encrypt(self.public, b, self.rng).value for b in blocks)
        return SignedEnvelope(payload, self.verify_key, sig, cert)


def signature_blocks(payload: bytes, cert: bytes, modulus: int) -> list[int]:
    """The integers a valid signature over ``payload``/``cert`` must open to."""
    return _blocks(_signed_material(payload, cert), modulus)


def make_signer(scheme: str, bits: int, rng: random.Random):
    if scheme == "trapdoor":
        return TrapdoorSigner.generate(bits, rng)
    if scheme == "paillier-literal":
        return PaillierLiteralSigner.generate(bits, rng)
    raise ValueError(f"unknown signature scheme {scheme!r}")


def _open_blocks(verify_key: bytes, sig: bytes) -> tuple[int, list[int]]:
    """Decrypt signature blocks with the enclosed verify key; return (modulus, blocks)."""
    if not verify_key:
        raise IntegrityError("empty verify key")
    tag, body = verify_key[0], verify_key[1:]
    values = unpack_ints(sig)
    if tag == TAG_TRAPDOOR:
        e, n = unpack_ints(body, 2)
        if n < 3 or any(not 0 <= v < n for v in values):
            raise IntegrityError("signature block out of range")
        return n, [kernels.powmod(v, e, n) for v in values]
    if tag == TAG_PAILLIER:
        lam, mu, n = unpack_ints(body, 3)
        sk = PaillierPrivateKey(lam, mu, n)
        pk = PaillierPublicKey(n)
        return n, [decrypt(sk, Ciphertext(v, pk)) for v in values]
    raise IntegrityError(f"unknown verify-key tag {tag}")


def verify(envelope: SignedEnvelope, expected_round: int | None = None) -> bool:
    """Accept iff the decrypted signature equals ``digest(payload) || cert``.

    With ``expected_round`` the payload must also be a packet stamped with
    that round, which rejects replays of genuinely signed old messages.
    """
    if not 1 <= len(envelope.cert) <= MAX_CERT:
        return False
    try:
        modulus, opened = _open_blocks(envelope.verify_key, envelope.sig)
        expected = _blocks(_signed_material(envelope.payload, envelope.cert), modulus)
    except (IntegrityError, DecodeError, ValueError):
        return False
    if opened != expected:
        return False
    if expected_round is not None:
        try:
            inner = decode_packet(envelope.payload)
        except FramingError:
            return False
        if inner.round != expected_round:
            return False
    return True


def seal(inner: Packet, signer, cert: bytes) -> Packet:
    """Wrap ``inner`` in a SIGNED_WRAPPER packet."""
    env = signer.sign(encode_packet(inner), cert)
    return Packet(MsgType.SIGNED_WRAPPER, inner.round, inner.sender, inner.receiver, envelope_to_body(env))


def envelope_to_body(env: SignedEnvelope) -> bytes:
    return encode_envelope_body(env.verify_key, env.cert, env.sig, env.payload)


def envelope_from_body(body: bytes) -> SignedEnvelope:
    vk, cert, sig, payload = decode_envelope_body(body)
    return SignedEnvelope(payload, vk, sig, cert)


def open_sealed(packet: Packet, expected_round: int | None = None) -> Packet:
    """Verify a SIGNED_WRAPPER packet and return the inner packet."""
    if packet.msg_type != MsgType.SIGNED_WRAPPER:
        raise IntegrityError("unsigned packet where a signature is required")
    try:
        env = envelope_from_body(packet.body)
    except FramingError as exc:
        raise IntegrityError(f"malformed envelope: {exc}") from exc
    if not verify(env, expected_round):
        raise IntegrityError(
            f"signature check failed for packet {packet.sender}->{packet.receiver} round {packet.round}"
        )
    inner = decode_packet(env.payload)
    if (inner.sender, inner.receiver) != (packet.sender, packet.receiver):
        raise IntegrityError("outer header does not match signed inner packet")
    return inner
