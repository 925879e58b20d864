"""Pure Python/numpy kernels, used when the compiled extension is unavailable.

Every function here has a twin with the same signature in ``_kernels.pyx``;
the two are checked against each other in the test suite.
"""

from __future__ import annotations

import numpy as np

NTT_MOD = 998244353  # 119 * 2**23 + 1
NTT_ROOT = 3
NTT_MAX_LOG = 23


def _step_lfsr(state: int, width: int, tapmask: int, n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.uint8)
    top = width - 1
    for i in range(n):
        out[i] = state & 1
        f = ((state & tapmask).bit_count() & 1) ^ 1
        state = (state >> 1) | (f << top)
    return out


def lfsr_bits(state: int, width: int, tapmask: int, n: int) -> np.ndarray:
    """Output ``n`` bits of the XNOR-feedback register.

    ``state`` holds b_1 in bit 0 through b_width in bit ``width - 1``; each
    step emits b_1, shifts every register one place toward b_1 and writes
    ``XOR(taps) ^ 1`` into b_width.

    With an even number of taps the complemented output obeys a homogeneous
    recurrence whose characteristic polynomial can be squared repeatedly, so
    the stream is produced in slices of doubling width instead of bit by bit.
    """
    taps = [i for i in range(width) if tapmask >> i & 1]
    if n <= 0:
        return np.empty(0, dtype=np.uint8)
    if len(taps) % 2 or not tapmask >> (width - 1) & 1 or n <= 4 * width:
        return _step_lfsr(state, width, tapmask, n)
    r = np.empty(max(n, width), dtype=np.uint8)
    r[:width] = [(state >> i & 1) ^ 1 for i in range(width)]
    # r[t + width*K] = XOR_j r[t + tap_j*K] once the recurrence is raised to x^K
    have, k = width, 1
    while have < n:
        if have >= 2 * width * k:
            k *= 2
        t0 = have - width * k
        take = min(k, n - have)
        acc = r[t0 + taps[0] * k:t0 + taps[0] * k + take].copy()
        for tap in taps[1:]:
            acc ^= r[t0 + tap * k:t0 + tap * k + take]
        r[have:have + take] = acc
        have += take
    return r[:n] ^ 1


def berlekamp_massey(bits: np.ndarray) -> int:
    """Linear complexity of a 0/1 sequence, polynomials held as Python ints."""
    n = len(bits)
    if n == 0:
        return 0
    # srev has s_j at bit position n-1-j so a right shift exposes s_N..s_{N-L}
    srev = int.from_bytes(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes(), "big")
    srev >>= (-n) % 8
    c, b, length, m = 1, 1, 0, -1
    for i in range(n):
        window = (srev >> (n - 1 - i)) & ((1 << (length + 1)) - 1)
        if (c & window).bit_count() & 1:
            t = c
            c ^= b << (i - m)
            if 2 * length <= i:
                length, m, b = i + 1 - length, i, t
    return length


def linear_complexities(blocks: np.ndarray) -> np.ndarray:
    blocks = np.ascontiguousarray(blocks, dtype=np.uint8)
    return np.array([berlekamp_massey(row) for row in blocks], dtype=np.int64)


_twiddle_cache: dict[tuple[int, bool], list[np.ndarray]] = {}


def _twiddles(size: int, invert: bool) -> list[np.ndarray]:
    key = (size, invert)
    if key not in _twiddle_cache:
        stages = []
        length = 2
        while length <= size:
            w = pow(NTT_ROOT, (NTT_MOD - 1) // length, NTT_MOD)
            if invert:
                w = pow(w, NTT_MOD - 2, NTT_MOD)
            half = length // 2
            tw = np.ones(1, dtype=np.int64)
            while tw.size < half:
                step = pow(w, tw.size, NTT_MOD)
                tw = np.concatenate([tw, tw * step % NTT_MOD])
            stages.append(tw[:half])
            length *= 2
        _twiddle_cache[key] = stages
    return _twiddle_cache[key]


def _bitrev(size: int) -> np.ndarray:
    bits = size.bit_length() - 1
    idx = np.arange(size, dtype=np.int64)
    rev = np.zeros(size, dtype=np.int64)
    for i in range(bits):
        rev |= ((idx >> i) & 1) << (bits - 1 - i)
    return rev


def ntt(a: np.ndarray, invert: bool = False) -> np.ndarray:
    """Number-theoretic transform along the last axis (length a power of two)."""
    size = a.shape[-1]
    if size & (size - 1) or size > 1 << NTT_MAX_LOG:
        raise ValueError(f"NTT length {size} is not a power of two <= 2^{NTT_MAX_LOG}")
    a = np.ascontiguousarray(a[..., _bitrev(size)], dtype=np.int64)
    lead = a.shape[:-1]
    length = 2
    for tw in _twiddles(size, invert):
        half = length // 2
        v = a.reshape(*lead, size // length, length)
        u = v[..., :half]
        t = v[..., half:] * tw % NTT_MOD
        a = np.concatenate([(u + t) % NTT_MOD, (u - t) % NTT_MOD], axis=-1).reshape(*lead, size)
        length *= 2
    if invert:
        a = a * pow(size, NTT_MOD - 2, NTT_MOD) % NTT_MOD
    return a


def ntt_size(p: int) -> int:
    size = 1
    while size < 2 * p - 1:
        size *= 2
    return size


def lane_layout(p: int) -> tuple[int, int]:
    """Bits per lane and lanes per transform for carry-safe row packing."""
    shift = p.bit_length()
    return shift, max(1, 29 // shift)  # 2^29 < NTT_MOD keeps packed values exact


def cyclic_convolve_gf2(xs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows of ``xs`` cyclically convolved with ``y`` over GF(2).

    ``xs`` has shape (k, p) and ``y`` shape (p,); entries are 0/1. The
    integer linear convolution is computed exactly mod an NTT prime, wrapped
    at p and reduced mod 2. Several rows share one transform: row l of a
    group sits in bits [l*shift, (l+1)*shift) and since every integer
    coefficient is at most p < 2^shift the lanes never carry into each other.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
    k, p = xs.shape
    if y.shape != (p,):
        raise ValueError("xs rows and y must share length")
    size = ntt_size(p)
    shift, lanes = lane_layout(p)
    fy = np.zeros(size, dtype=np.int64)
    fy[:p] = y
    fy = ntt(fy)
    groups = -(-k // lanes)
    padded = np.zeros((groups * lanes, p), dtype=np.int64)
    padded[:k] = xs
    weights = np.int64(1) << (shift * np.arange(lanes, dtype=np.int64))
    packed = np.einsum("glp,l->gp", padded.reshape(groups, lanes, p), weights)
    out = np.empty((groups * lanes, p), dtype=np.uint8)
    # bounded batch keeps temporaries near 64 MiB
    batch = max(1, (1 << 23) // size)
    for start in range(0, groups, batch):
        chunk = np.zeros((min(batch, groups - start), size), dtype=np.int64)
        chunk[:, :p] = packed[start:start + batch]
        lin = ntt(ntt(chunk) * fy % NTT_MOD, invert=True)
        cyc = lin[:, :p].copy()
        cyc[:, : p - 1] += lin[:, p: 2 * p - 1]
        for lane in range(lanes):
            rows = slice((start * lanes) + lane, (start + chunk.shape[0]) * lanes, lanes)
            out[rows] = (cyc >> (lane * shift)) & 1
    return out[:k]
