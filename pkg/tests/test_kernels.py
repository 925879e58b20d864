"""Compiled and numpy kernels must agree with each other and with naive oracles."""

import numpy as np
import pytest

from rngworkbench import _backend, _pure
from rngworkbench.sources import PAPER_LFSR


def naive_cyclic(x, y):
    p = len(y)
    return np.array([sum(int(x[j]) & int(y[(k - j) % p]) for j in range(p)) & 1 for k in range(p)],
                    dtype=np.uint8)


def naive_bm(s):
    """Smallest L such that some connection polynomial of degree L generates s."""
    s = [int(b) for b in s]
    n = len(s)
    for length in range(n + 1):
        for mask in range(1 << length):
            coeffs = [(mask >> i) & 1 for i in range(length)]
            if all(sum(c & s[t - 1 - i] for i, c in enumerate(coeffs)) % 2 == s[t]
                   for t in range(length, n)):
                return length
    return n


def test_fallback_always_available():
    assert "python" in _backend.available()


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.load("fortran")


def test_lfsr_matches_stepper(backend):
    for n in (1, 63, 64, 65, 1000, 70001):
        want = _pure._step_lfsr(0xCAFEF00D, 32, PAPER_LFSR.tapmask, n)
        assert np.array_equal(backend.lfsr_bits(0xCAFEF00D, 32, PAPER_LFSR.tapmask, n), want)


def test_compiled_stepper_matches_doubling_path():
    kernels = pytest.importorskip("rngworkbench._kernels")
    for n in (5, 4096, 200000):
        assert np.array_equal(kernels.lfsr_step_bits(12345, 32, PAPER_LFSR.tapmask, n),
                              _pure.lfsr_bits(12345, 32, PAPER_LFSR.tapmask, n))


def test_bm_against_brute_force(backend, rng):
    for _ in range(40):
        s = rng.integers(0, 2, int(rng.integers(1, 12)), dtype=np.uint8)
        assert backend.berlekamp_massey(s) == naive_bm(s)


def test_bm_edge_cases(backend):
    assert backend.berlekamp_massey(np.zeros(50, np.uint8)) == 0
    one_at_end = np.zeros(50, np.uint8)
    one_at_end[-1] = 1
    assert backend.berlekamp_massey(one_at_end) == 50


def test_linear_complexities_rows(backend, rng):
    blocks = rng.integers(0, 2, (30, 500), dtype=np.uint8)
    got = backend.linear_complexities(blocks)
    assert got.tolist() == [_pure.berlekamp_massey(b) for b in blocks]


def test_ntt_size_and_lanes(backend):
    assert backend.ntt_size(10007) == 1 << 15
    assert backend.lane_layout(10007) == (14, 2)
    assert backend.lane_layout(101) == (7, 4)
    assert backend.lane_layout(11) == (4, 7)


@pytest.mark.parametrize("p", [3, 5, 7, 11, 101])
def test_cyclic_convolution_matches_naive(backend, rng, p):
    xs = rng.integers(0, 2, (17, p), dtype=np.uint8)
    y = rng.integers(0, 2, p, dtype=np.uint8)
    got = backend.cyclic_convolve_gf2(xs, y)
    for row, x in zip(got, xs):
        assert np.array_equal(row, naive_cyclic(x, y))


def test_lanes_never_carry_at_worst_case(backend):
    # all-ones rows maximise every coefficient, which is where lane carries would show
    p = 101
    xs = np.ones((9, p), np.uint8)
    y = np.ones(p, np.uint8)
    assert np.all(backend.cyclic_convolve_gf2(xs, y) == p % 2)


def test_backends_agree_at_seed_size(rng):
    if len(_backend.available()) < 2:
        pytest.skip("compiled kernels not built")
    xs = rng.integers(0, 2, (5, 10007), dtype=np.uint8)
    y = rng.integers(0, 2, 10007, dtype=np.uint8)
    a = _backend.load("compiled").cyclic_convolve_gf2(xs, y)
    b = _backend.load("python").cyclic_convolve_gf2(xs, y)
    assert np.array_equal(a, b)
