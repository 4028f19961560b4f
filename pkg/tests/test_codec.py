import random
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from secure_consensus.codec import (
    CodecConfig,
    CodecError,
    SignedOverflowError,
    decode_signed,
    dequantize,
    encode_signed,
    quantize,
)
from secure_consensus.paillier import decrypt, encrypt, hom_add, keygen, keypair_from_primes, scalar_mul


def reference_round(x, scale):
    # Decimal ROUND_HALF_UP rounds ties away from zero on magnitude
    exact = Decimal(Fraction(x).numerator * scale) / Decimal(Fraction(x).denominator)
    return int(exact.to_integral_value(rounding=ROUND_HALF_UP))


def test_quantize_examples():
    assert quantize(0.0, 10**6) == 0
    assert quantize(3.14159, 10**6) == 3141590
    assert quantize(-1 / 3, 1000) == reference_round(-1 / 3, 1000) == -333


def test_quantize_ties_away_from_zero():
    assert quantize(2.5, 1) == 3
    assert quantize(-2.5, 1) == -3
    assert quantize(0.125, 4) == 1  # 0.5 exactly
    assert quantize(-0.125, 4) == -1


@settings(max_examples=300)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.sampled_from([1, 10, 1000, 10**6]))
def test_quantize_matches_reference_rounding(x, scale):
    assert quantize(x, scale) == reference_round(x, scale)


def test_dequantize_examples():
    assert dequantize(3141590, 10**6) == 3.14159
    assert dequantize(0, 7) == 0.0
    with pytest.raises(CodecError):
        dequantize(1, 0)


def test_quantization_error_bound():
    rng = random.Random(0)
    n = 10**6
    for _ in range(1000):
        x = rng.uniform(-1e6, 1e6)
        assert abs(x - dequantize(quantize(x, n), n)) <= 1 / n


def test_quantize_overflow():
    with pytest.raises(SignedOverflowError):
        quantize(2.0**70, 1, width=64)
    with pytest.raises(SignedOverflowError):
        quantize(float("inf"), 1)
    assert quantize(127.0, 1, width=8) == 127
    with pytest.raises(SignedOverflowError):
        quantize(128.0, 1, width=8)


def test_encode_signed_examples():
    assert encode_signed(-5, 16) == 65531
    assert encode_signed(7, 16) == 7
    for w in (4, 8, 16, 64):
        assert encode_signed(-(2 ** (w - 1)), w) == 2 ** (w - 1)
    with pytest.raises(SignedOverflowError):
        encode_signed(2**15, 16)
    with pytest.raises(SignedOverflowError):
        encode_signed(-(2**15) - 1, 16)


def test_signed_roundtrip_exhaustive_w8():
    for v in range(-128, 128):
        assert decode_signed(encode_signed(v, 8), 8) == v


def test_decode_discards_overflow_bits():
    assert decode_signed(65531 + 2**40, 16) == -5
    with pytest.raises(CodecError):
        decode_signed(-1, 8)


@settings(max_examples=300)
@given(st.integers(-(2**15), 2**15 - 1), st.integers(0, 2**20))
def test_scaled_congruence(v, k):
    w = 16
    n = 2**61 - 1  # any modulus large enough that k*u never wraps
    u = encode_signed(v, w)
    if abs(k * v) < 2 ** (w - 1) and k * u < n:
        assert decode_signed(k * u % n, w) == k * v


def test_homomorphic_compatibility_small_modulus():
    # n = 35 analog: w = 3 gives values in [-4, 4); condition k(|v1|+|v2|+2^w) < n
    pk, sk = keypair_from_primes(5, 7)
    rng = random.Random(0)
    w = 3
    checked = 0
    for v1 in range(-4, 4):
        for v2 in range(-4, 4):
            for k in range(0, 5):
                if k * (abs(v1) + abs(v2) + 2**w) >= pk.n or abs(k * (v1 + v2)) >= 2 ** (w - 1):
                    continue
                c = hom_add(encrypt(pk, encode_signed(v1, w), rng), encrypt(pk, encode_signed(v2, w), rng))
                assert decode_signed(decrypt(sk, scalar_mul(c, k)), w) == k * (v1 + v2)
                checked += 1
    assert checked > 20


def test_homomorphic_compatibility_production_size():
    pk, sk = keygen(128, random.Random(1))
    rng = random.Random(2)
    w = 64
    for _ in range(200):
        v1 = rng.randrange(-(2**40), 2**40)
        v2 = rng.randrange(-(2**40), 2**40)
        k = rng.randrange(0, 2**16)
        c = hom_add(encrypt(pk, encode_signed(v1, w), rng), encrypt(pk, encode_signed(v2, w), rng))
        assert decode_signed(decrypt(sk, scalar_mul(c, k)), w) == k * (v1 + v2)


def test_config_headroom():
    cfg = CodecConfig()
    assert cfg.max_multiplier(0.9) == 58982
    cfg.validate_for_key(512, 0.9)
    cfg.validate_for_key(83, 0.9)
    with pytest.raises(CodecError):
        cfg.validate_for_key(82, 0.9)
    with pytest.raises(CodecError):
        CodecConfig(state_scale=0)
