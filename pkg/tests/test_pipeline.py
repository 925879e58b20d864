import json
import math

import numpy as np
import pytest

from rngworkbench import pipeline
from rngworkbench.bitio import BitString
from rngworkbench.extractors import BUDGET, circulant_reference
from rngworkbench.mermin import simulate_records
from rngworkbench.pipeline import PipelineError, PipelineRefused
from rngworkbench.sources import biased_iid_generate, uniform_bits

SMALL = dict(seed_bits=1009, eps_round=2.0**-42)


@pytest.fixture(scope="module")
def source():
    return biased_iid_generate(0.55, 400_000, 21)


@pytest.fixture(scope="module")
def seed():
    return uniform_bits(1009, 99)


def assert_manifest_consistent(out, manifest):
    assert manifest.produced_bits == len(out)
    if manifest.level > 1:
        assert manifest.recount() == len(out)
        assert manifest.budget.satisfied and manifest.budget.eps_total <= BUDGET
        doc = json.loads(manifest.to_json())
        assert sum(j["rounds"] * j["m_out"] for j in doc["jobs"]) == len(out)


def test_level1_rate(source):
    out, man = pipeline.run_level1(source)
    expected = len(source) // 2 * 2 * 0.55 * 0.45
    assert abs(len(out) - expected) < 4 * math.sqrt(len(source) / 2 * 0.495 * 0.505)
    assert_manifest_consistent(out, man)
    assert man.jobs[0][0].m_out == len(out)


def test_level1_all_zeros_is_empty_not_fatal():
    out, man = pipeline.run_level1(BitString.from_bits(np.zeros(100, np.uint8)))
    assert len(out) == 0 and any("empty" in n for n in man.notes)


def test_level2_blocks_match_reference(source, seed):
    out, man = pipeline.run_level2(source, seed, 0.7, max_bits=2000, **SMALL)
    n, m = 1008, man.jobs[0][0].m_out
    assert m == math.floor(0.7 * 1008 - 84)
    first = circulant_reference(source[:n], seed, m)
    assert out[:m] == first
    assert_manifest_consistent(out, man)
    assert len(out) == 2000 and len(man.jobs) == 2  # last round truncated


def test_level2_discards_tail(source, seed):
    out, man = pipeline.run_level2(source[: 1008 * 3 + 500], seed, 0.7, **SMALL)
    assert man.discarded_bits == 500 and man.consumed_bits == 1008 * 3
    assert_manifest_consistent(out, man)


def test_level2_rejects_bad_inputs(source, seed):
    with pytest.raises(PipelineError, match="seed has"):
        pipeline.run_level2(source, seed[:500], 0.7, **SMALL)
    with pytest.raises(PipelineError, match="not prime"):
        pipeline.run_level2(source, seed, 0.7, seed_bits=1000)
    with pytest.raises(PipelineError, match="too short"):
        pipeline.run_level2(source[:900], seed, 0.7, **SMALL)
    with pytest.raises(PipelineError, match="budget"):
        pipeline.run_level2(source, seed, 0.7, seed_bits=1009, eps_round=2.0**-35)


def test_level2_is_deterministic(source, seed):
    a, ma = pipeline.run_level2(source, seed, 0.7, max_bits=5000, **SMALL)
    b, mb = pipeline.run_level2(source, seed, 0.7, max_bits=5000, **SMALL)
    assert a == b and ma.to_json() == mb.to_json()


def test_level3_self_mode(source):
    out, man = pipeline.run_level3(source, None, 0.7, margin=0.2, max_bits=3000, **SMALL)
    assert man.params["alpha_second"] == pytest.approx(0.5)
    assert man.seed_provenance["second_source"]["source"] == "self"
    ts = man.seed_provenance["two_source_rounds"]
    assert man.budget.rounds == ts + sum(c for _, c in man.jobs)
    assert_manifest_consistent(out, man)


def test_level3_second_rate_examples():
    for alpha, second in ((0.853, 0.167), (0.453, 0.567)):
        assert 1.02 - alpha == pytest.approx(second)


def test_level3_rejects_impossible_second_rate(source):
    with pytest.raises(PipelineError, match="outside"):
        pipeline.run_level3(source, None, 0.01, margin=0.02, **SMALL)


def test_level4_refuses_low_rate(source):
    records = simulate_records(0.9575, 20_000, 1)
    with pytest.raises(PipelineRefused, match="needs alpha_rng > 0.482"):
        pipeline.run_level4(source, records, 0.453, math.exp(-20), alpha_q=0.518, **SMALL)


def test_level4_proceeds_and_charges_mermin_eps(source):
    records = simulate_records(0.9575, 20_000, 2)
    eps_m = 2.0**-40
    out, man = pipeline.run_level4(source, records, 0.698, eps_m, alpha_q=0.518, max_bits=4000, **SMALL)
    assert dict(man.budget.extra)["mermin_estimation"] == eps_m
    assert man.params["two_source_prime"] <= 40_000
    assert_manifest_consistent(out, man)


def test_manifest_write(tmp_path, source, seed):
    out, man = pipeline.run_level2(source, seed, 0.7, max_bits=1000, **SMALL)
    path = man.write(tmp_path / "m.json")
    doc = json.loads(path.read_text())
    assert doc["budget"]["satisfied"] and doc["produced_bits"] == 1000
