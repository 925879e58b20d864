# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: register stepping, Berlekamp-Massey, GF(2) cyclic
convolution through an NTT. Signatures mirror ``_pure``."""

import numpy as np
cimport numpy as cnp

from rngworkbench import _pure
from libc.stdint cimport uint8_t, uint64_t, int64_t
from libc.string cimport memset, memcpy
from libc.stdlib cimport malloc, free

cnp.import_array()

# enum constants let the C compiler strength-reduce the modular reductions
cdef enum:
    MOD = 998244353
    ROOT = 3
    MAX_LOG = 23


cdef extern from *:
    int __builtin_parityll(unsigned long long) nogil


cdef inline int _parity(uint64_t v) nogil:
    return __builtin_parityll(v)


def lfsr_step_bits(unsigned long long state, int width, unsigned long long tapmask, Py_ssize_t n):
    """One register step per output bit."""
    cdef cnp.ndarray[uint8_t, ndim=1] out = np.empty(max(n, 0), dtype=np.uint8)
    cdef uint8_t[::1] o = out
    cdef Py_ssize_t i
    cdef int top = width - 1
    cdef uint64_t s = state, f
    with nogil:
        for i in range(n):
            o[i] = s & 1
            f = _parity(s & tapmask) ^ 1
            s = (s >> 1) | (f << top)
    return out


def lfsr_bits(unsigned long long state, int width, unsigned long long tapmask, Py_ssize_t n):
    # long streams: the vectorised polynomial-doubling path beats bit stepping
    if n > 1 << 16:
        return _pure.lfsr_bits(state, width, tapmask, n)
    return lfsr_step_bits(state, width, tapmask, n)


cdef Py_ssize_t _bm(const uint8_t* s, Py_ssize_t n, uint8_t* c, uint8_t* b, uint8_t* t) nogil:
    cdef Py_ssize_t L = 0, m = -1, N, i, shift, degb = 0, degc = 0, degt
    cdef uint8_t d
    memset(c, 0, n + 1)
    memset(b, 0, n + 1)
    c[0] = 1
    b[0] = 1
    for N in range(n):
        d = s[N]
        for i in range(1, L + 1):
            d ^= c[i] & s[N - i]
        if d:
            memcpy(t, c, degc + 1)
            degt = degc
            shift = N - m
            for i in range(degb + 1):
                if i + shift > n:
                    break
                c[i + shift] ^= b[i]
            if degb + shift > degc:
                degc = degb + shift if degb + shift <= n else n
            if 2 * L <= N:
                L = N + 1 - L
                m = N
                memset(b, 0, degb + 1)
                memcpy(b, t, degt + 1)
                degb = degt
    return L


def berlekamp_massey(bits):
    cdef const uint8_t[::1] s = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef Py_ssize_t n = s.shape[0]
    if n == 0:
        return 0
    cdef uint8_t* work = <uint8_t*> malloc(3 * (n + 1))
    cdef Py_ssize_t L
    try:
        L = _bm(&s[0], n, work, work + n + 1, work + 2 * (n + 1))
    finally:
        free(work)
    return L


def linear_complexities(blocks):
    cdef const uint8_t[:, ::1] a = np.ascontiguousarray(blocks, dtype=np.uint8)
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], r
    out = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] o = out
    if n == 0 or k == 0:
        return out
    cdef uint8_t* work = <uint8_t*> malloc(3 * (n + 1))
    try:
        with nogil:
            for r in range(k):
                o[r] = _bm(&a[r, 0], n, work, work + n + 1, work + 2 * (n + 1))
    finally:
        free(work)
    return out


cdef inline uint64_t _powmod(uint64_t b, uint64_t e) nogil:
    cdef uint64_t r = 1
    b %= MOD
    while e:
        if e & 1:
            r = r * b % MOD
        b = b * b % MOD
        e >>= 1
    return r


cdef void _ntt(uint64_t* a, Py_ssize_t size, bint invert, const uint64_t* roots) nogil:
    # roots[half + j] = w_len^j for each stage, laid out by half length
    cdef Py_ssize_t i, j = 0, bit, length, half, k
    cdef uint64_t u, v, tmp, inv
    for i in range(1, size):
        bit = size >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j ^= bit
        if i < j:
            tmp = a[i]
            a[i] = a[j]
            a[j] = tmp
    length = 2
    while length <= size:
        half = length >> 1
        i = 0
        while i < size:
            for k in range(half):
                u = a[i + k]
                v = a[i + k + half] * roots[half + k] % MOD
                a[i + k] = u + v if u + v < MOD else u + v - MOD
                a[i + k + half] = u - v if u >= v else u + MOD - v
            i += length
        length <<= 1
    if invert:
        inv = _powmod(size, MOD - 2)
        for i in range(size):
            a[i] = a[i] * inv % MOD


cdef void _fill_roots(uint64_t* roots, Py_ssize_t size, bint invert) nogil:
    cdef Py_ssize_t half = 1, k
    cdef uint64_t w
    while half < size:
        w = _powmod(ROOT, (MOD - 1) // (2 * half))
        if invert:
            w = _powmod(w, MOD - 2)
        roots[half] = 1
        for k in range(1, half):
            roots[half + k] = roots[half + k - 1] * w % MOD
        half <<= 1


def ntt_size(Py_ssize_t p):
    cdef Py_ssize_t size = 1
    while size < 2 * p - 1:
        size <<= 1
    return size


def lane_layout(Py_ssize_t p):
    """Bits per lane and lanes per transform for carry-safe row packing."""
    cdef int shift = 0, lanes
    while (1 << shift) <= p:
        shift += 1
    lanes = 0
    while (lanes + 1) * shift <= 29:  # 2^29 < MOD keeps every packed value exact
        lanes += 1
    return shift, max(lanes, 1)


def cyclic_convolve_gf2(xs, y):
    xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
    cdef const uint8_t[:, ::1] X = np.ascontiguousarray(xs)
    cdef const uint8_t[::1] Y = np.ascontiguousarray(y, dtype=np.uint8)
    cdef Py_ssize_t k = X.shape[0], p = X.shape[1], size, r, i, l, nl
    if Y.shape[0] != p:
        raise ValueError("xs rows and y must share length")
    size = ntt_size(p)
    if size > (1 << MAX_LOG):
        raise ValueError("convolution length exceeds the NTT range")
    shift_, lanes_ = lane_layout(p)
    cdef int shift = shift_, lanes = lanes_
    cdef uint64_t c
    out = np.empty((k, p), dtype=np.uint8)
    cdef uint8_t[:, ::1] O = out
    cdef uint64_t* fy = <uint64_t*> malloc(size * sizeof(uint64_t))
    cdef uint64_t* fx = <uint64_t*> malloc(size * sizeof(uint64_t))
    cdef uint64_t* fwd = <uint64_t*> malloc(size * sizeof(uint64_t))
    cdef uint64_t* inv = <uint64_t*> malloc(size * sizeof(uint64_t))
    try:
        with nogil:
            _fill_roots(fwd, size, False)
            _fill_roots(inv, size, True)
            memset(fy, 0, size * sizeof(uint64_t))
            for i in range(p):
                fy[i] = Y[i]
            _ntt(fy, size, False, fwd)
            r = 0
            while r < k:
                nl = lanes if r + lanes <= k else k - r
                memset(fx, 0, size * sizeof(uint64_t))
                # lane l carries row r+l in bits [l*shift, (l+1)*shift); every
                # lane coefficient stays <= p < 2^shift so lanes never carry
                for l in range(nl):
                    for i in range(p):
                        fx[i] |= (<uint64_t> X[r + l, i]) << (l * shift)
                _ntt(fx, size, False, fwd)
                for i in range(size):
                    fx[i] = fx[i] * fy[i] % MOD
                _ntt(fx, size, True, inv)
                for i in range(p):
                    c = fx[i] + fx[i + p] if i < p - 1 else fx[i]
                    for l in range(nl):
                        O[r + l, i] = (c >> (l * shift)) & 1
                r += nl
    finally:
        free(fy)
        free(fx)
        free(fwd)
        free(inv)
    return out
