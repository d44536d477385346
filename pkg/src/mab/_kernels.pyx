# cython: language_level=3
"""GMP-backed big-integer kernels.

Drop-in replacement for ``mab._pykernels``; every function takes and returns
Python ints. Values cross the boundary as big-endian byte strings.
"""
from libc.stdlib cimport malloc, free

cdef extern from "gmp.h":
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    ctypedef __mpz_struct *mpz_ptr
    ctypedef const __mpz_struct *mpz_srcptr

    void mpz_init(mpz_ptr)
    void mpz_clear(mpz_ptr)
    void mpz_set(mpz_ptr, mpz_srcptr)
    void mpz_set_ui(mpz_ptr, unsigned long)
    void mpz_import(mpz_ptr, size_t, int, size_t, int, size_t, const void *)
    void *mpz_export(void *, size_t *, int, size_t, int, size_t, mpz_srcptr)
    size_t mpz_sizeinbase(mpz_srcptr, int)
    int mpz_sgn(mpz_srcptr)
    void mpz_neg(mpz_ptr, mpz_srcptr)
    void mpz_mul(mpz_ptr, mpz_srcptr, mpz_srcptr)
    void mpz_mod(mpz_ptr, mpz_srcptr, mpz_srcptr)
    void mpz_sub_ui(mpz_ptr, mpz_srcptr, unsigned long)
    void mpz_powm(mpz_ptr, mpz_srcptr, mpz_srcptr, mpz_srcptr)
    int mpz_invert(mpz_ptr, mpz_srcptr, mpz_srcptr)
    int mpz_jacobi(mpz_srcptr, mpz_srcptr)
    int mpz_cmp(mpz_srcptr, mpz_srcptr)
    int mpz_cmp_ui(mpz_srcptr, unsigned long)
    unsigned long mpz_fdiv_ui(mpz_srcptr, unsigned long)
    unsigned long mpz_scan1(mpz_srcptr, unsigned long)
    void mpz_tdiv_q_2exp(mpz_ptr, mpz_srcptr, unsigned long)

BACKEND = "gmp"


cdef void _load(mpz_ptr dst, object value):
    cdef bint neg = value < 0
    if neg:
        value = -value
    cdef bytes raw = value.to_bytes((value.bit_length() + 7) // 8 or 1, "big")
    mpz_import(dst, len(raw), 1, 1, 1, 0, <const char *>raw)
    if neg:
        mpz_neg(dst, dst)


cdef object _store(mpz_srcptr src):
    cdef size_t count = (mpz_sizeinbase(src, 2) + 7) // 8
    cdef unsigned char *buf
    cdef size_t written = 0
    if mpz_sgn(src) == 0:
        return 0
    buf = <unsigned char *>malloc(count)
    try:
        mpz_export(buf, &written, 1, 1, 1, 0, src)
        out = int.from_bytes(buf[:written], "big")
    finally:
        free(buf)
    if mpz_sgn(src) < 0:
        out = -out
    return out


cdef int _powm(mpz_ptr rop, mpz_srcptr base, mpz_ptr exp, mpz_srcptr mod) except -1:
    cdef mpz_t inv
    if mpz_sgn(exp) < 0:
        mpz_init(inv)
        try:
            if mpz_invert(inv, base, mod) == 0:
                raise ValueError("base is not invertible for the given modulus")
            mpz_neg(exp, exp)
            mpz_powm(rop, inv, exp, mod)
            mpz_neg(exp, exp)
        finally:
            mpz_clear(inv)
    else:
        mpz_powm(rop, base, exp, mod)
    return 0


def powmod(base, exp, mod):
    cdef mpz_t b, e, m, r
    if mod == 1:
        return 0
    mpz_init(b); mpz_init(e); mpz_init(m); mpz_init(r)
    try:
        _load(b, base % mod)
        _load(e, exp)
        _load(m, mod)
        _powm(r, b, e, m)
        return _store(r)
    finally:
        mpz_clear(b); mpz_clear(e); mpz_clear(m); mpz_clear(r)


def powmod2(b1, e1, b2, e2, mod):
    cdef mpz_t x, y, ex, ey, m, r1, r2
    if mod == 1:
        return 0
    mpz_init(x); mpz_init(y); mpz_init(ex); mpz_init(ey)
    mpz_init(m); mpz_init(r1); mpz_init(r2)
    try:
        _load(x, b1 % mod)
        _load(y, b2 % mod)
        _load(ex, e1)
        _load(ey, e2)
        _load(m, mod)
        _powm(r1, x, ex, m)
        _powm(r2, y, ey, m)
        mpz_mul(r1, r1, r2)
        mpz_mod(r1, r1, m)
        return _store(r1)
    finally:
        mpz_clear(x); mpz_clear(y); mpz_clear(ex); mpz_clear(ey)
        mpz_clear(m); mpz_clear(r1); mpz_clear(r2)


def jacobi(a, n):
    cdef mpz_t x, y
    mpz_init(x); mpz_init(y)
    try:
        _load(x, a % n)
        _load(y, n)
        return mpz_jacobi(x, y)
    finally:
        mpz_clear(x); mpz_clear(y)


def miller_rabin(n, bases):
    cdef mpz_t nn, nm1, d, a, x
    cdef unsigned long s, i
    cdef bint passed
    mpz_init(nn); mpz_init(nm1); mpz_init(d); mpz_init(a); mpz_init(x)
    try:
        _load(nn, n)
        mpz_sub_ui(nm1, nn, 1)
        s = mpz_scan1(nm1, 0)
        mpz_tdiv_q_2exp(d, nm1, s)
        for base in bases:
            _load(a, base)
            mpz_powm(x, a, d, nn)
            if mpz_cmp_ui(x, 1) == 0 or mpz_cmp(x, nm1) == 0:
                continue
            passed = False
            for i in range(1, s):
                mpz_mul(x, x, x)
                mpz_mod(x, x, nn)
                if mpz_cmp(x, nm1) == 0:
                    passed = True
                    break
            if not passed:
                return False
        return True
    finally:
        mpz_clear(nn); mpz_clear(nm1); mpz_clear(d); mpz_clear(a); mpz_clear(x)


def first_divisor(n, primes):
    cdef mpz_t nn
    cdef unsigned long p
    mpz_init(nn)
    try:
        _load(nn, n)
        for prime in primes:
            p = prime
            if mpz_fdiv_ui(nn, p) == 0 and mpz_cmp_ui(nn, p) != 0:
                return prime
        return 0
    finally:
        mpz_clear(nn)


def residues(n, primes):
    cdef mpz_t nn
    cdef bint neg = n < 0
    mpz_init(nn)
    try:
        _load(nn, -n if neg else n)
        out = [mpz_fdiv_ui(nn, p) for p in primes]
    finally:
        mpz_clear(nn)
    if neg:
        out = [(-r) % p for r, p in zip(out, primes)]
    return out
