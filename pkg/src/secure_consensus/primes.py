"""Prime generation and modular-arithmetic helpers."""

from __future__ import annotations

import random

from . import kernels

MR_ROUNDS = 40

_SMALL_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
    73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233,
    239, 241, 251,
)


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, x, y)`` with ``a*x + b*y == g == gcd(a, b)``."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def modinv(a: int, n: int) -> int:
    g, x, _ = egcd(a % n, n)
    if g != 1:
        raise ValueError(f"{a} has no inverse modulo {n}")
    return x % n


def is_probable_prime(n: int, rng: random.Random, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin with ``rounds`` random bases drawn from ``rng``."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    bases = [rng.randrange(2, n - 1) for _ in range(rounds)]
    return kernels.miller_rabin(n, bases)


def random_prime(bits: int, rng: random.Random, rounds: int = MR_ROUNDS) -> int:
    """Random prime of exactly ``bits`` bits with the two top bits set.

    Setting both top bits guarantees that the product of two such primes has
    exactly ``2 * bits`` bits.
    """
    if bits < 3:
        raise ValueError("need at least 3 bits")
    top = (1 << (bits - 1)) | (1 << (bits - 2))
    while True:
        candidate = rng.getrandbits(bits) | top | 1
        if is_probable_prime(candidate, rng, rounds):
            return candidate
