"""Fixed-point quantization and two's-complement encoding.

Real states are scaled by ``state_scale`` and rounded half away from zero.
Signed integers travel as their ``w``-bit two's-complement pattern read as
unsigned; after homomorphic arithmetic the decrypted plaintext is reduced
modulo ``2**w`` and reinterpreted as signed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

HEADROOM_BITS = 2


class CodecError(ValueError):
    pass


class SignedOverflowError(CodecError):
    """Value does not fit the signed window."""


@dataclass(frozen=True)
class CodecConfig:
    state_scale: int = 10**6
    weight_scale: int = 2**16
    signed_width: int = 64

    def __post_init__(self):
        if self.state_scale < 1 or self.weight_scale < 1:
            raise CodecError("scales must be positive integers")
        if self.signed_width < 2:
            raise CodecError("signed width must be at least 2 bits")

    def max_multiplier(self, a_bar: float) -> int:
        """Largest integer multiplier a node may draw for bound ``a_bar``."""
        return math.floor(a_bar * self.weight_scale)

    def required_key_bits(self, a_bar: float) -> int:
        """Smallest modulus bit length that leaves the configured headroom."""
        a_max = max(self.max_multiplier(a_bar), 1)
        return self.signed_width + a_max.bit_length() + HEADROOM_BITS + 1

    def validate_for_key(self, key_bits: int, a_bar: float) -> None:
        # responses carry (p1 + p2) * a with p1, p2 < 2**w; this must stay
        # below n or the mod-n wrap destroys the mod-2**w congruence
        need = self.required_key_bits(a_bar)
        if key_bits < need:
            raise CodecError(
                f"key of {key_bits} bits leaves no headroom for w={self.signed_width}, "
                f"S_a={self.weight_scale}, a_bar={a_bar}; need >= {need} bits"
            )

    def response_bound(self, a_bar: float) -> int:
        """Exclusive upper bound on a legitimate decrypted response."""
        return (1 << (self.signed_width + HEADROOM_BITS)) * max(self.max_multiplier(a_bar), 1)


def quantize(x: float, scale: int, width: int | None = None) -> int:
    """Round ``scale * x`` half away from zero, exactly."""
    if not math.isfinite(x):
        raise SignedOverflowError(f"cannot quantize non-finite value {x!r}")
    num, den = float(x).as_integer_ratio()
    q, r = divmod(abs(num) * scale, den)
    if 2 * r >= den:
        q += 1
    value = -q if num < 0 else q
    if width is not None and not -(1 << (width - 1)) <= value < (1 << (width - 1)):
        raise SignedOverflowError(f"{x} * {scale} overflows a {width}-bit signed window")
    return value


def dequantize(y: int, scale: int) -> float:
    if scale == 0:
        raise CodecError("scale must be non-zero")
    return y / scale


def encode_signed(v: int, width: int) -> int:
    half = 1 << (width - 1)
    if not -half <= v < half:
        raise SignedOverflowError(f"{v} outside the {width}-bit signed range")
    return v % (1 << width)


def decode_signed(u: int, width: int) -> int:
    if u < 0:
        raise CodecError("decode_signed expects a non-negative integer")
    u %= 1 << width
    return u - (1 << width) if u >> (width - 1) else u
