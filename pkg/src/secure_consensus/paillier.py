"""Paillier cryptosystem with ``g = n + 1``.

Keys and ciphertexts are immutable; every operation is a pure function of its
arguments plus an explicitly supplied :class:`random.Random`.

>>> import random
>>> pk, sk = keypair_from_primes(5, 7)
>>> c = hom_add(encrypt(pk, 3, random.Random(0)), encrypt(pk, 4, random.Random(1)))
>>> decrypt(sk, c)
7
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import cached_property
from math import gcd
from typing import NamedTuple

from . import kernels
from .primes import modinv, random_prime
from .serial import pack_int, unpack_int, DecodeError

DEFAULT_KEY_BITS = 512
MIN_KEY_BITS = 16
FINGERPRINT_SIZE = 8


class PaillierError(ValueError):
    """Invalid key material, plaintext, or ciphertext."""


class KeyMismatchError(PaillierError):
    """Operands were produced under different public keys."""


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int

    def __post_init__(self):
        if self.n < 15 or self.n % 2 == 0:
            raise PaillierError(f"modulus must be odd and composite, got {self.n}")

    @property
    def g(self) -> int:
        return self.n + 1

    @property
    def key_bits(self) -> int:
        return self.n.bit_length()

    @cached_property
    def nsquare(self) -> int:
        return self.n * self.n

    @cached_property
    def fingerprint(self) -> bytes:
        return fingerprint_of(self.n)

    def to_bytes(self) -> bytes:
        return pack_int(self.n)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PaillierPublicKey":
        n, end = unpack_int(data)
        if end != len(data):
            raise DecodeError("trailing bytes after public key")
        return cls(n)


@dataclass(frozen=True)
class PaillierPrivateKey:
    lam: int
    mu: int
    n: int

    def __post_init__(self):
        if self.lam * self.mu % self.n != 1:
            raise PaillierError("lambda * mu must be 1 mod n")
        if gcd(self.lam, self.n) != 1:
            raise PaillierError("gcd(lambda, n) must be 1")

    @cached_property
    def nsquare(self) -> int:
        return self.n * self.n

    @cached_property
    def fingerprint(self) -> bytes:
        return fingerprint_of(self.n)


class PaillierKeyPair(NamedTuple):
    public: PaillierPublicKey
    private: PaillierPrivateKey


@dataclass(frozen=True)
class Ciphertext:
    """An element of Z*_{n^2} bound to the public key that produced it."""

    value: int
    public_key: PaillierPublicKey

    def __post_init__(self):
        if not 0 < self.value < self.public_key.nsquare:
            raise PaillierError("ciphertext outside Z_{n^2}")

    @property
    def key_fingerprint(self) -> bytes:
        return self.public_key.fingerprint

    def to_bytes(self) -> bytes:
        return pack_int(self.value) + self.key_fingerprint

    @classmethod
    def from_bytes(cls, data: bytes, public_key: PaillierPublicKey) -> "Ciphertext":
        value, end = unpack_int(data)
        if len(data) - end != FINGERPRINT_SIZE:
            raise DecodeError("ciphertext must end with an 8-byte fingerprint")
        if data[end:] != public_key.fingerprint:
            raise KeyMismatchError("ciphertext fingerprint does not match public key")
        return cls(value, public_key)


def fingerprint_of(n: int) -> bytes:
    raw = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return hashlib.sha256(raw).digest()[:FINGERPRINT_SIZE]


def keypair_from_primes(p: int, q: int) -> PaillierKeyPair:
    """Assemble a key pair from known primes (tests and small oracles)."""
    if p == q:
        raise PaillierError("p and q must differ")
    n = p * q
    lam = (p - 1) * (q - 1)
    if gcd(lam, n) != 1:
        raise PaillierError(f"gcd(n, lambda) != 1 for p={p}, q={q}")
    return PaillierKeyPair(PaillierPublicKey(n), PaillierPrivateKey(lam, modinv(lam, n), n))


def keygen(key_bits: int, rng: random.Random, max_attempts: int = 64) -> PaillierKeyPair:
    """Generate a key pair whose modulus has exactly ``key_bits`` bits."""
    if key_bits % 2:
        raise PaillierError(f"key_bits must be even, got {key_bits}")
    if key_bits < MIN_KEY_BITS:
        raise PaillierError(f"key_bits must be at least {MIN_KEY_BITS}")
    half = key_bits // 2
    for _ in range(max_attempts):
        p = random_prime(half, rng)
        q = random_prime(half, rng)
        if p == q:
            continue
        try:
            pair = keypair_from_primes(p, q)
        except PaillierError:
            continue
        if pair.public.key_bits == key_bits:
            return pair
    raise PaillierError(f"no valid prime pair found in {max_attempts} attempts")


def random_unit(n: int, rng: random.Random) -> int:
    """Uniform draw from Z*_n by rejection."""
    while True:
        r = rng.randrange(1, n)
        if gcd(r, n) == 1:
            return r


def encrypt_with_nonce(pk: PaillierPublicKey, m: int, r: int) -> Ciphertext:
    if not 0 <= m < pk.n:
        raise PaillierError(f"plaintext {m} outside Z_n")
    if not 0 < r < pk.n or gcd(r, pk.n) != 1:
        raise PaillierError("nonce must lie in Z*_n")
    return Ciphertext(kernels.paillier_encrypt(pk.n, pk.nsquare, m, r), pk)


def encrypt(pk: PaillierPublicKey, m: int, rng: random.Random) -> Ciphertext:
    if not 0 <= m < pk.n:
        raise PaillierError(f"plaintext {m} outside Z_n")
    return encrypt_with_nonce(pk, m, random_unit(pk.n, rng))


def decrypt(sk: PaillierPrivateKey, c: Ciphertext) -> int:
    if c.key_fingerprint != sk.fingerprint:
        raise KeyMismatchError("ciphertext was not produced under this key")
    if gcd(c.value, sk.n) != 1:
        raise PaillierError("ciphertext not in Z*_{n^2}")
    return kernels.paillier_decrypt(c.value, sk.lam, sk.mu, sk.n, sk.nsquare)


def hom_add(c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext of ``(m1 + m2) mod n``."""
    if c1.key_fingerprint != c2.key_fingerprint:
        raise KeyMismatchError("cannot add ciphertexts under different keys")
    pk = c1.public_key
    return Ciphertext(c1.value * c2.value % pk.nsquare, pk)


def scalar_mul(c: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of ``(k * m) mod n`` for a plaintext ``k >= 0``."""
    if k < 0:
        raise PaillierError("scalar must be non-negative")
    pk = c.public_key
    return Ciphertext(kernels.powmod(c.value, k, pk.nsquare), pk)
