import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rngworkbench.bitio import BitString
from rngworkbench.extractors import (
    BLOCK_BITS,
    BUDGET,
    SEED_BITS,
    EpsilonBudget,
    ExtractorJob,
    ExtractorKind,
    circulant_core,
    circulant_many,
    circulant_reference,
    eps_budget,
    is_prime,
    largest_prime_at_most,
    output_length,
    seeded_strong_distance,
    von_neumann,
)
from rngworkbench.sources import biased_iid_generate
from rngworkbench.stattests import Verdict, monobit_p

B = BitString.from_str


def test_von_neumann_examples():
    assert von_neumann(B("0110")).to01() == "01"
    assert len(von_neumann(B("0000000"))) == 0
    assert von_neumann(B("10100")).to01() == "11"


@given(st.lists(st.integers(0, 1), max_size=400))
def test_von_neumann_length_is_discordant_pair_count(bits):
    pairs = [(bits[i], bits[i + 1]) for i in range(0, len(bits) - 1, 2)]
    want = [a for a, b in pairs if a != b]
    assert von_neumann(BitString.from_bits(bits)).bits.tolist() == want


def test_von_neumann_exact_conditional_uniformity():
    # enumerate pair probabilities exactly for several biases
    for p in (0.1, 0.3, 0.5, 0.75, 0.99):
        pr = {(a, b): (p if a == 0 else 1 - p) * (p if b == 0 else 1 - p)
              for a, b in itertools.product((0, 1), repeat=2)}
        kept = pr[(0, 1)] + pr[(1, 0)]
        assert pr[(0, 1)] / kept == pytest.approx(0.5, abs=1e-15)


def test_von_neumann_on_biased_source():
    out = von_neumann(biased_iid_generate(0.75, 10**6, 11))
    mean, sd = 10**6 / 2 * 2 * 0.75 * 0.25, math.sqrt(10**6 / 2 * 0.375 * 0.625)
    assert abs(len(out) - mean) <= 4 * sd
    assert monobit_p(out).verdict is not Verdict.FAIL


def test_circulant_examples():
    assert circulant_core(B("10"), B("110"), 3).to01() == "110"
    assert circulant_core(B("01"), B("110"), 3).to01() == "011"
    assert circulant_core(B("0000"), B("10110"), 4).to01() == "0000"


def test_circulant_argument_checks():
    with pytest.raises(ValueError, match="prime"):
        circulant_core(B("000"), B("0000"), 2)
    with pytest.raises(ValueError, match="one bit longer"):
        circulant_core(B("00"), B("00000"), 2)
    with pytest.raises(ValueError, match="outside"):
        circulant_core(B("00"), B("000"), 0)


@pytest.mark.parametrize("p", [3, 5, 7])
def test_circulant_exhaustive_small(p):
    n = p - 1
    for xv in range(1 << n):
        x = BitString.from_bits([(xv >> i) & 1 for i in range(n)])
        ys = np.array([[(yv >> i) & 1 for i in range(p)] for yv in range(1 << p)], np.uint8)
        for y in ys:
            yb = BitString.from_bits(y)
            assert circulant_core(x, yb, p) == circulant_reference(x, yb, p)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([11, 101, 1009]), st.integers(0, 2**32 - 1))
def test_circulant_bilinear(p, seed):
    rng = np.random.default_rng(seed)
    x1, x2 = rng.integers(0, 2, (2, p - 1), dtype=np.uint8)
    y1, y2 = rng.integers(0, 2, (2, p), dtype=np.uint8)
    f = lambda x, y: circulant_core(BitString.from_bits(x), BitString.from_bits(y), p - 1).bits
    assert np.array_equal(f(x1 ^ x2, y1), f(x1, y1) ^ f(x2, y1))
    assert np.array_equal(f(x1, y1 ^ y2), f(x1, y1) ^ f(x1, y2))


def test_circulant_many_matches_single_rows(rng):
    xs = rng.integers(0, 2, (6, 100), dtype=np.uint8)
    y = BitString.from_bits(rng.integers(0, 2, 101, dtype=np.uint8))
    got = circulant_many(xs, y, 40)
    for row, x in zip(got, xs):
        assert row.tolist() == circulant_reference(BitString.from_bits(x), y, 40).bits.tolist()


def test_primes():
    assert is_prime(10007) and not is_prime(10006) and not is_prime(1)
    assert largest_prime_at_most(10006) == 9973
    assert largest_prime_at_most(10007) == 10007
    assert SEED_BITS == BLOCK_BITS + 1 and is_prime(SEED_BITS)


def test_output_length_examples():
    assert output_length("seeded", 10006, 0.698 * 10006, None, 2.0**-64) == 6856
    assert output_length("seeded", 10006, 0.453 * 10006, None, 2.0**-64) == 4404
    k1 = 0.51 * 10006
    assert output_length("two-source", 10006, k1, 1.02 * 10007 - k1, 2.0**-64) == 72
    assert output_length("two-source", 10006, 5000, 5007, 2.0**-64) == 0


@given(st.floats(0, 10006), st.floats(0, 10007), st.integers(1, 200))
def test_output_length_monotone(k1, k2, e):
    m = output_length("two-source", 10006, k1, k2, 2.0**-e)
    assert output_length("two-source", 10006, min(10006, k1 + 50), k2, 2.0**-e) >= m
    assert output_length("two-source", 10006, k1, min(10007, k2 + 50), 2.0**-e) >= m
    assert output_length("two-source", 10006, k1, k2, 2.0**-(e + 1)) <= m


def test_output_length_range_checks():
    with pytest.raises(ValueError):
        output_length("seeded", 10, 11, None, 0.1)
    with pytest.raises(ValueError):
        output_length("seeded", 10, 5, None, 1.0)
    with pytest.raises(ValueError):
        output_length("vn", 10, 5, None, 0.1)


def test_kind_aliases():
    assert ExtractorKind.parse("vn") is ExtractorKind.VON_NEUMANN
    assert ExtractorKind.parse("two-source") is ExtractorKind.TWO_SOURCE


def test_job_invariants():
    job = ExtractorJob.plan("seeded", 10006, 0.698 * 10006)
    assert job.n_seed == 10007 and job.m_out == 6856
    with pytest.raises(ValueError):
        ExtractorJob(ExtractorKind.SEEDED, 10005, 10006, 1.0, 1.0, 2.0**-64, 1)
    with pytest.raises(ValueError):
        ExtractorJob(ExtractorKind.SEEDED, 10, 11, 1.0, 1.0, 2.0**-64, 11)


def test_budget_examples():
    b = eps_budget(2.0**-39, 5 * 10**6, 2.0**-64)
    assert b.eps_total == pytest.approx(2.0**-39 + 5e6 * 2.0**-64)
    assert b.satisfied
    assert eps_budget(2.0**-39, 0, 2.0**-64).eps_total == 2.0**-39
    assert not eps_budget(2.0**-39, 2, 2.0**-33).satisfied


def test_budget_boundary_and_extras():
    assert EpsilonBudget(2.0**-33, ((1, 2.0**-33),)).satisfied  # exactly 2^-32
    b = EpsilonBudget(2.0**-39, ((3, 2.0**-64),), extra=(("other", 2.0**-40),))
    assert b.rounds == 3
    assert b.eps_total == pytest.approx(2.0**-39 + 3 * 2.0**-64 + 2.0**-40)
    assert b.to_dict()["satisfied"] and b.limit == BUDGET


def test_budget_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        eps_budget(0.0, 1, 0.1)
    with pytest.raises(ValueError):
        eps_budget(0.1, -1, 0.1)


def test_toy_strongness_distance():
    # flat sources of growing size get closer to uniform given the seed
    near = seeded_strong_distance([1, 2, 4, 8, 3, 5, 6, 9], 4, 1)
    far = seeded_strong_distance([1], 4, 1)
    assert 0 <= near < far <= 0.5
