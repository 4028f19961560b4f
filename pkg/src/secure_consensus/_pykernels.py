"""Pure-Python big-integer kernels.

Reference implementation of the hot loops. The compiled ``_ckernels`` module
exposes the same functions with the same signatures and must return
bit-identical results; ``kernels`` picks one at import time.
"""

from __future__ import annotations

from typing import Iterable

BACKEND = "python"


def powmod(base: int, exponent: int, modulus: int) -> int:
    if base < 0 or exponent < 0 or modulus <= 0:
        raise ValueError("powmod expects non-negative base/exponent and positive modulus")
    return pow(base, exponent, modulus)


def paillier_encrypt(n: int, nsquare: int, m: int, r: int) -> int:
    # g = n + 1, so g^m mod n^2 collapses to 1 + m*n
    return (1 + m * n) % nsquare * pow(r, n, nsquare) % nsquare


def paillier_decrypt(c: int, lam: int, mu: int, n: int, nsquare: int) -> int:
    u = pow(c, lam, nsquare)
    return (u - 1) // n * mu % n


def miller_rabin(n: int, bases: Iterable[int]) -> bool:
    """Strong-probable-prime test of odd ``n > 3`` against every base."""
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in bases:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True
