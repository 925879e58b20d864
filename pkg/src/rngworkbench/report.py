"""Profiles, false-failure budgets and comparisons across processing levels."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .bitio import BitString
from .stattests import BatteryConfig, BatteryReport, load_config, run_battery
from .stattests.battery import PROFILE_NAMES, ConfigError
from .stattests.verdicts import get_profile


def run_profile(s: BitString, profile: str = "recommended", config: BatteryConfig | None = None,
                sample_id: str = "", workers: int = 1) -> BatteryReport:
    if profile not in PROFILE_NAMES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {PROFILE_NAMES}")
    return run_battery(s, config or load_config(), profile, sample_id, workers)


def expected_false_failures(tests: Iterable[tuple[int, float]]) -> float:
    """Sum of count * tail_mass, treating tests as independent."""
    total = 0.0
    for count, mass in tests:
        if count < 0:
            raise ValueError("test counts must be nonnegative")
        if not 0 < mass < 1:
            raise ValueError(f"tail mass {mass} outside (0, 1)")
        total += count * mass
    return total


def profile_budget(config: BatteryConfig, profile: str) -> float:
    """False-failure budget of a profile assuming every test runs."""
    return expected_false_failures((1, get_profile(spec.verdict).fail_mass)
                                   for spec in config.profile(profile))


def log_failures(f: int) -> float:
    return math.log2(f + 1)


@dataclass
class ComparisonRow:
    rng: str
    level: int
    failed: int
    weak: int
    budget: float

    @property
    def success(self) -> bool:
        return self.failed < self.budget

    def to_dict(self) -> dict:
        return {"rng": self.rng, "level": self.level, "failed": self.failed, "weak": self.weak,
                "budget": self.budget, "success": self.success,
                "y_failed": log_failures(self.failed),
                "y_failed_weak": log_failures(self.failed + self.weak)}


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    reports: dict = field(default_factory=dict, repr=False)

    def improvement(self, rng: str | None = None) -> bool:
        """True when failure counts never increase with the level."""
        rows = sorted((r for r in self.rows if rng is None or r.rng == rng), key=lambda r: r.level)
        return all(a.failed >= b.failed for a, b in zip(rows, rows[1:]))

    def plot_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rng", "level", "failed", "failed_plus_weak", "y_failed", "y_failed_weak",
                         "y_budget"])
        for r in self.rows:
            writer.writerow([r.rng, r.level, r.failed, r.failed + r.weak,
                             f"{log_failures(r.failed):.6f}", f"{log_failures(r.failed + r.weak):.6f}",
                             f"{math.log2(r.budget + 1):.6f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows],
                "monotone": {rng: self.improvement(rng) for rng in sorted({r.rng for r in self.rows})}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        return suite_table({f"{r.rng} L{r.level}".strip(): self.reports[(r.rng, r.level)]
                            for r in self.rows if (r.rng, r.level) in self.reports})


def compare_levels(reports: Mapping[int, BatteryReport], rng: str = "") -> ComparisonReport:
    if not reports:
        raise ValueError("no reports to compare")
    rows, kept = [], {}
    for level in sorted(reports):
        rep = reports[level]
        rows.append(ComparisonRow(rng, level, rep.failed, rep.weak, rep.expected_false_failures))
        kept[(rng, level)] = rep
    return ComparisonReport(rows, kept)


def suite_table(reports: Mapping[str, BatteryReport]) -> str:
    """Fixed-width table of ``failed (weak)`` cells, one column per report."""
    labels = list(reports)
    suites: list[str] = []
    for rep in reports.values():
        for name in rep.per_suite():
            if name not in suites:
                suites.append(name)
    width = max(12, *(len(label) + 2 for label in labels))
    lines = [f"{'suite':<12}" + "".join(f"{label:>{width}}" for label in labels)]
    for suite in suites:
        cells = []
        for rep in reports.values():
            row = rep.per_suite().get(suite)
            cells.append("-" if row is None or row["run"] == 0 else f"{row['failed']} ({row['weak']})")
        lines.append(f"{suite:<12}" + "".join(f"{c:>{width}}" for c in cells))
    lines.append(f"{'total':<12}" + "".join(f"{f'{r.failed} ({r.weak})':>{width}}" for r in reports.values()))
    lines.append(f"{'budget':<12}" + "".join(f"{r.expected_false_failures:>{width}.3f}" for r in reports.values()))
    return "\n".join(lines)
