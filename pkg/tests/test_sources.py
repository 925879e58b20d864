import json
from collections import Counter

import numpy as np
import pytest

from rngworkbench import _pure
from rngworkbench.sources import (
    LFSR8,
    PAPER_LFSR,
    BeaconClient,
    BeaconError,
    BeaconPulse,
    Lfsr,
    LfsrSpec,
    LfsrState,
    biased_iid_generate,
    lfsr_generate,
    synthetic_beacon_fixture,
)


def step_oracle(bits, taps, n):
    """Register as a Python list b[0]=b_1 ... ; emit b_1, shift toward b_1, new b_w."""
    reg = list(bits)
    out = []
    for _ in range(n):
        out.append(reg[0])
        f = 1
        for t in taps:
            f ^= reg[t - 1]
        reg = reg[1:] + [f]
    return out


def test_golden_vector_from_zero_seed():
    got = lfsr_generate(LfsrState.from_hex("00000000"), 64).to01()
    want = "".join(map(str, step_oracle([0] * 32, (32, 22, 2, 1), 64)))
    assert got == want
    # the first 32 bits replay the seed, then the feedback ones appear
    assert got[:32] == "0" * 32 and got[32] == "1"


@pytest.mark.parametrize("seed", ["00000001", "DEADBEEF", "12345678", "80000000"])
def test_matches_step_oracle(seed):
    state = LfsrState.from_hex(seed)
    got = lfsr_generate(state, 5000).bits.tolist()
    assert got == step_oracle(state.bits(), (32, 22, 2, 1), 5000)


def test_hex_seed_msb_is_b1():
    state = LfsrState.from_hex("80000000")
    assert state.bits()[0] == 1 and sum(state.bits()) == 1
    assert state.to_hex() == "80000000"


def test_lockup_seed_rejected():
    with pytest.raises(ValueError, match="lock-up"):
        LfsrState.from_hex("FFFFFFFF")


def test_seed_too_wide():
    with pytest.raises(ValueError):
        LfsrState.from_hex("1FFFFFFFF")


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        lfsr_generate(LfsrState(0), 0)


def test_stateful_generation_is_continuous():
    gen = Lfsr(LfsrState(0x1234))
    parts = [gen.generate(n) for n in (1, 31, 100, 70000)]
    whole = lfsr_generate(LfsrState(0x1234), sum(len(p) for p in parts))
    assert parts[0] + parts[1] + parts[2] + parts[3] == whole
    assert gen.state.step_count == 70132


def test_output_recurrence_holds():
    s = lfsr_generate(LfsrState(0xBEEF), 20000).bits.astype(int)
    t = np.arange(len(s) - 32)
    assert np.all(s[t + 32] == s[t + 31] ^ s[t + 21] ^ s[t + 1] ^ s[t] ^ 1)


def test_eight_bit_analog_full_period():
    for reg in range(256):
        try:
            state = LfsrState(reg, LFSR8)
        except ValueError:
            assert reg == 0xFF
            continue
        period = next(i for i, r in enumerate(Lfsr(state).states()) if i and r == reg)
        assert period == 255


def _polymulmod(a, b, mod, deg):
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= mod
    return out


def _xpow(e, mod, deg):
    result, base = 1, 2
    while e:
        if e & 1:
            result = _polymulmod(result, base, mod, deg)
        base = _polymulmod(base, base, mod, deg)
        e >>= 1
    return result


def _polymod(a, b):
    while a and a.bit_length() >= b.bit_length():
        a ^= b << (a.bit_length() - b.bit_length())
    return a


CHAR_POLY = (1 << 32) | (1 << 31) | (1 << 21) | (1 << 1) | 1


def test_characteristic_polynomial_is_reducible():
    # the complemented output obeys x^32 + x^31 + x^21 + x + 1, which has the
    # cubic factor x^3 + x^2 + 1, so the period cannot be 2^32 - 1
    assert _polymod(CHAR_POLY, 0b1101) == 0
    assert _xpow(2**32 - 1, CHAR_POLY, 32) != 1


def test_no_state_repeats_in_first_million_steps():
    gen = Lfsr(LfsrState(0x00000000))
    seen = set()
    for _, reg in zip(range(10**6), gen.states()):
        assert reg not in seen
        seen.add(reg)


def test_raw_blocks_have_linear_complexity_33():
    s = lfsr_generate(LfsrState(7), 2000).bits
    assert _pure.berlekamp_massey(s[:500]) == 33


def test_spec_validation():
    with pytest.raises(ValueError):
        LfsrSpec(8, (9,))
    assert PAPER_LFSR.period_bound == 2**32 - 1


def test_biased_iid_frequency_and_determinism():
    a = biased_iid_generate(0.75, 200000, 3)
    zeros = 1 - a.count_ones() / len(a)
    assert abs(zeros - 0.75) < 4 * np.sqrt(0.75 * 0.25 / 200000)
    assert a == biased_iid_generate(0.75, 200000, 3)


@pytest.mark.parametrize("p0", [0.0, 1.0, -0.1, float("nan")])
def test_biased_iid_rejects_degenerate_p0(p0):
    with pytest.raises(ValueError):
        biased_iid_generate(p0, 10, 0)


PULSE = {"pulse": {"pulseIndex": 42, "outputValue": "AB" * 64, "timeStamp": "2020-01-01T00:00:00.000Z"}}


def test_pulse_parse():
    p = BeaconPulse.parse(json.dumps(PULSE))
    assert p.pulse_index == 42 and len(p.output_value) == 512
    assert p.output_value.to_hex() == "AB" * 64
    assert BeaconPulse.parse(p.to_doc()) == p


@pytest.mark.parametrize("bad", [
    "{not json",
    {"pulse": {"pulseIndex": 1, "outputValue": "AB", "timeStamp": "t"}},
    {"pulse": {"pulseIndex": 1, "timeStamp": "t"}},
    {"pulse": {"pulseIndex": 1, "outputValue": "ZZ" * 64, "timeStamp": "t"}},
])
def test_malformed_pulse(bad):
    with pytest.raises(BeaconError, match="malformed"):
        BeaconPulse.parse(bad if isinstance(bad, str) else json.dumps(bad))


def test_live_client_walks_back_through_pulses():
    calls = []

    def transport(url):
        calls.append(url)
        index = 100 if url.endswith("last") else int(url.rsplit("/", 1)[1])
        doc = {"pulse": {"pulseIndex": index, "outputValue": f"{index:02X}" * 64, "timeStamp": "t"}}
        return json.dumps(doc).encode()

    client = BeaconClient(endpoint="https://example.invalid/beacon/2.0/", transport=transport)
    bits, pulses = client.seed_bits(10007)
    assert len(bits) == 10007 and len(pulses) == 20
    assert pulses[:3] == [100, 99, 98]
    assert calls[0] == "https://example.invalid/beacon/2.0/pulse/last"


def test_fixture_playback(tmp_path):
    path = synthetic_beacon_fixture(tmp_path / "fx.json", 3, rng_seed=1)
    client = BeaconClient(fixture=path)
    first = client.fetch()
    assert first.pulse_index == 1
    assert client.fetch(3).pulse_index == 3
    bits, pulses = BeaconClient(fixture=path).seed_bits(1000)
    assert len(bits) == 1000 and pulses == [1, 2]
    with pytest.raises(BeaconError, match="exhausted"):
        BeaconClient(fixture=path).seed_bits(2000)
