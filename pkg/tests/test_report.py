import csv
import io
import math

import pytest

from rngworkbench.report import (
    ComparisonReport,
    ComparisonRow,
    compare_levels,
    expected_false_failures,
    log_failures,
    profile_budget,
    run_profile,
    suite_table,
)
from rngworkbench.sources import LfsrState, lfsr_generate
from rngworkbench.stattests import load_config
from rngworkbench.stattests.battery import ConfigError


def test_expected_false_failures():
    assert expected_false_failures([(4600, 7.5 / 4600)]) == pytest.approx(7.5)
    assert expected_false_failures([(1, 0.01)]) == 0.01
    with pytest.raises(ValueError):
        expected_false_failures([(1, 1.0)])


def test_bundled_budgets():
    cfg = load_config()
    all_budget = profile_budget(cfg, "all")
    assert all_budget == pytest.approx(0.073, abs=1e-9)
    assert profile_budget(cfg, "light") < profile_budget(cfg, "recommended") <= all_budget


def test_log_transform():
    assert log_failures(0) == 0
    assert log_failures(855) == pytest.approx(math.log2(856))
    assert log_failures(855) == pytest.approx(9.74, abs=0.01)


def test_success_is_failed_below_budget():
    assert ComparisonRow("x", 2, 0, 3, 0.07).success
    assert not ComparisonRow("x", 0, 1, 0, 0.07).success
    assert ComparisonRow("x", 0, 7, 0, 7.5).success
    assert not ComparisonRow("x", 0, 8, 0, 7.5).success


def test_unknown_profile(uniform_1m):
    with pytest.raises(ConfigError):
        run_profile(uniform_1m, "heavy")


def test_light_on_uniform(uniform_1m):
    assert run_profile(uniform_1m, "light").failed <= 1


def test_all_on_lfsr():
    assert run_profile(lfsr_generate(LfsrState(5), 10**6), "all").failed >= 1


def test_compare_levels(uniform_1m):
    lfsr = run_profile(lfsr_generate(LfsrState(5), 10**6), "all")
    good = run_profile(uniform_1m, "all")
    cmp_ = compare_levels({0: lfsr, 1: lfsr, 2: good}, rng="lfsr")
    assert cmp_.improvement("lfsr")
    assert [r.success for r in cmp_.rows] == [False, False, good.failed == 0]
    rows = list(csv.DictReader(io.StringIO(cmp_.plot_csv())))
    assert [int(r["level"]) for r in rows] == [0, 1, 2]
    for row in rows:
        assert float(row["y_failed"]) == pytest.approx(math.log2(int(row["failed"]) + 1), abs=1e-6)
    assert "budget" in cmp_.to_table()


def test_compare_requires_reports():
    with pytest.raises(ValueError):
        compare_levels({})


def test_worsening_is_not_improvement():
    rows = [ComparisonRow("r", 0, 1, 0, 0.1), ComparisonRow("r", 1, 3, 0, 0.1)]
    assert not ComparisonReport(rows).improvement()


def test_suite_table_cells(uniform_1m):
    rep = run_profile(uniform_1m[: 2 * 10**5], "light")
    text = suite_table({"a": rep})
    lines = text.splitlines()
    assert lines[0].split() == ["suite", "a"]
    assert lines[-2].split()[0] == "total"
    assert f"{rep.failed} ({rep.weak})" in lines[-2]
