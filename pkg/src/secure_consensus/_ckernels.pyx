# cython: language_level=3, boundscheck=False, wraparound=False
"""GMP-backed big-integer kernels (compiled twin of ``_pykernels``)."""

from libc.stdlib cimport malloc, free

cdef extern from "gmp.h":
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    void mpz_init(mpz_t)
    void mpz_clear(mpz_t)
    void mpz_set_ui(mpz_t, unsigned long)
    void mpz_add_ui(mpz_t, const mpz_t, unsigned long)
    void mpz_sub_ui(mpz_t, const mpz_t, unsigned long)
    void mpz_mul(mpz_t, const mpz_t, const mpz_t)
    void mpz_mod(mpz_t, const mpz_t, const mpz_t)
    void mpz_tdiv_q(mpz_t, const mpz_t, const mpz_t)
    void mpz_fdiv_q_2exp(mpz_t, const mpz_t, unsigned long)
    void mpz_powm(mpz_t, const mpz_t, const mpz_t, const mpz_t)
    int mpz_cmp(const mpz_t, const mpz_t)
    int mpz_cmp_ui(const mpz_t, unsigned long)
    unsigned long mpz_scan1(const mpz_t, unsigned long)
    size_t mpz_sizeinbase(const mpz_t, int)
    void mpz_import(mpz_t, size_t, int, size_t, int, size_t, const void *)
    void *mpz_export(void *, size_t *, int, size_t, int, size_t, const mpz_t)

BACKEND = "gmp"


cdef int _load(mpz_t z, object value) except -1:
    if value < 0:
        raise ValueError("kernels operate on non-negative integers")
    cdef bytes raw = value.to_bytes((value.bit_length() + 7) // 8, "big")
    cdef const char *buf = raw
    if len(raw) == 0:
        mpz_set_ui(z, 0)
    else:
        mpz_import(z, len(raw), 1, 1, 1, 0, buf)
    return 0


cdef object _dump(mpz_t z):
    cdef size_t count = 0
    cdef size_t nbytes = (mpz_sizeinbase(z, 2) + 7) // 8
    cdef unsigned char *buf = <unsigned char *>malloc(nbytes + 1)
    if buf == NULL:
        raise MemoryError()
    try:
        mpz_export(buf, &count, 1, 1, 1, 0, z)
        return int.from_bytes(buf[:count], "big")
    finally:
        free(buf)


def powmod(base, exponent, modulus):
    if base < 0 or exponent < 0 or modulus <= 0:
        raise ValueError("powmod expects non-negative base/exponent and positive modulus")
    cdef mpz_t b, e, m, out
    mpz_init(b); mpz_init(e); mpz_init(m); mpz_init(out)
    try:
        _load(b, base); _load(e, exponent); _load(m, modulus)
        mpz_powm(out, b, e, m)
        return _dump(out)
    finally:
        mpz_clear(b); mpz_clear(e); mpz_clear(m); mpz_clear(out)


def paillier_encrypt(n, nsquare, m, r):
    cdef mpz_t zn, zn2, zm, zr, gm, rn
    mpz_init(zn); mpz_init(zn2); mpz_init(zm); mpz_init(zr); mpz_init(gm); mpz_init(rn)
    try:
        _load(zn, n); _load(zn2, nsquare); _load(zm, m); _load(zr, r)
        mpz_mul(gm, zm, zn)
        mpz_add_ui(gm, gm, 1)
        mpz_mod(gm, gm, zn2)
        mpz_powm(rn, zr, zn, zn2)
        mpz_mul(gm, gm, rn)
        mpz_mod(gm, gm, zn2)
        return _dump(gm)
    finally:
        mpz_clear(zn); mpz_clear(zn2); mpz_clear(zm); mpz_clear(zr); mpz_clear(gm); mpz_clear(rn)


def paillier_decrypt(c, lam, mu, n, nsquare):
    cdef mpz_t zc, zl, zmu, zn, zn2, u
    mpz_init(zc); mpz_init(zl); mpz_init(zmu); mpz_init(zn); mpz_init(zn2); mpz_init(u)
    try:
        _load(zc, c); _load(zl, lam); _load(zmu, mu); _load(zn, n); _load(zn2, nsquare)
        mpz_powm(u, zc, zl, zn2)
        mpz_sub_ui(u, u, 1)
        mpz_tdiv_q(u, u, zn)
        mpz_mul(u, u, zmu)
        mpz_mod(u, u, zn)
        return _dump(u)
    finally:
        mpz_clear(zc); mpz_clear(zl); mpz_clear(zmu); mpz_clear(zn); mpz_clear(zn2); mpz_clear(u)


def miller_rabin(n, bases):
    """Strong-probable-prime test of odd ``n > 3`` against every base."""
    cdef mpz_t zn, nm1, d, a, x, two
    cdef unsigned long s, i
    cdef bint composite
    mpz_init(zn); mpz_init(nm1); mpz_init(d); mpz_init(a); mpz_init(x); mpz_init(two)
    try:
        _load(zn, n)
        mpz_sub_ui(nm1, zn, 1)
        s = mpz_scan1(nm1, 0)
        mpz_fdiv_q_2exp(d, nm1, s)
        mpz_set_ui(two, 2)
        for base in bases:
            _load(a, base)
            mpz_powm(x, a, d, zn)
            if mpz_cmp_ui(x, 1) == 0 or mpz_cmp(x, nm1) == 0:
                continue
            composite = True
            for i in range(1, s):
                mpz_powm(x, x, two, zn)
                if mpz_cmp(x, nm1) == 0:
                    composite = False
                    break
            if composite:
                return False
        return True
    finally:
        mpz_clear(zn); mpz_clear(nm1); mpz_clear(d); mpz_clear(a); mpz_clear(x); mpz_clear(two)
