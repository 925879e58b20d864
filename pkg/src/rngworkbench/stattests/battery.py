"""Battery configuration and execution."""

from __future__ import annotations

import json
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..bitio import BitString
from . import checks
from .checks import InsufficientData, TestOutcome
from .verdicts import Verdict, get_profile

REGISTRY = {
    "monobit": checks.monobit_p,
    "block_frequency": checks.block_frequency_p,
    "runs": checks.runs_p,
    "serial": checks.serial_p,
    "chi2_bytes": checks.chi2_bytes_p,
    "ent_mean": checks.ent_mean_p,
    "ent_pi": checks.ent_pi_p,
    "ent_scc": checks.ent_scc_p,
    "linear_complexity": checks.linear_complexity_p,
}

PROFILE_NAMES = ("light", "recommended", "all")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TestSpec:
    __test__ = False

    name: str
    test: str
    suite: str
    verdict: str
    params: dict = field(default_factory=dict)

    def run(self, s: BitString, sample_id: str = "") -> TestOutcome:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                out = REGISTRY[self.test](s, profile=self.verdict, **self.params)
            except InsufficientData as exc:
                out = TestOutcome(self.name, None, None, Verdict.SKIPPED, self.verdict,
                                  skipped_reason=str(exc))
        if caught:
            out.details["warnings"] = sorted({str(w.message) for w in caught})
        out.test_name = self.name
        out.suite = self.suite
        out.sample_id = sample_id
        return out


@dataclass(frozen=True)
class BatteryConfig:
    tests: dict[str, TestSpec]
    profiles: dict[str, tuple[str, ...]]

    def profile(self, name: str) -> list[TestSpec]:
        if name not in self.profiles:
            raise ConfigError(f"unknown battery profile {name!r}; known: {sorted(self.profiles)}")
        return [self.tests[t] for t in self.profiles[name]]

    @classmethod
    def from_dict(cls, doc: dict) -> "BatteryConfig":
        try:
            raw_tests, raw_profiles = doc["tests"], doc["profiles"]
        except (KeyError, TypeError):
            raise ConfigError("config needs 'tests' and 'profiles' tables") from None
        tests = {}
        for name, entry in raw_tests.items():
            if entry.get("test") not in REGISTRY:
                raise ConfigError(f"{name}: unknown test {entry.get('test')!r}")
            try:
                get_profile(entry.get("verdict", "nist-style"))
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None
            tests[name] = TestSpec(name, entry["test"], entry.get("suite", entry["test"]),
                                   entry.get("verdict", "nist-style"), dict(entry.get("params", {})))
        profiles = {k: tuple(v) for k, v in raw_profiles.items()}
        for pname, members in profiles.items():
            missing = [m for m in members if m not in tests]
            if missing:
                raise ConfigError(f"profile {pname} names undefined tests {missing}")
        if "all" in profiles:
            everything = set(profiles["all"])
            for pname in ("light", "recommended"):
                if pname in profiles and not set(profiles[pname]) <= everything:
                    raise ConfigError(f"profile {pname} is not a subset of 'all'")
        return cls(tests, profiles)


def load_config(path: str | os.PathLike | None = None) -> BatteryConfig:
    """Load a battery config; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("rngworkbench").joinpath("data/battery.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"battery config is not valid JSON: {exc}") from None
    return BatteryConfig.from_dict(doc)


@dataclass
class BatteryReport:
    profile: str
    sample_id: str
    n_bits: int
    outcomes: list[TestOutcome]
    suite_seconds: dict[str, float] = field(default_factory=dict)

    def _count(self, verdict: Verdict) -> int:
        return sum(o.verdict is verdict for o in self.outcomes)

    @property
    def failed(self) -> int:
        return self._count(Verdict.FAIL)

    @property
    def weak(self) -> int:
        return self._count(Verdict.WEAK)

    @property
    def skipped(self) -> int:
        return self._count(Verdict.SKIPPED)

    @property
    def run(self) -> int:
        return len(self.outcomes) - self.skipped

    @property
    def expected_false_failures(self) -> float:
        """Sum of per-test false-failure rates over tests that actually ran."""
        return sum(get_profile(o.profile).fail_mass for o in self.outcomes
                   if o.verdict is not Verdict.SKIPPED)

    def per_suite(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for o in self.outcomes:
            row = out.setdefault(o.suite, {"run": 0, "failed": 0, "weak": 0, "skipped": 0})
            if o.verdict is Verdict.SKIPPED:
                row["skipped"] += 1
                continue
            row["run"] += 1
            row["failed"] += o.verdict is Verdict.FAIL
            row["weak"] += o.verdict is Verdict.WEAK
        return out

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "sample": self.sample_id,
            "bits": self.n_bits,
            "failed": self.failed,
            "weak": self.weak,
            "skipped": self.skipped,
            "expected_false_failures": self.expected_false_failures,
            "suites": self.per_suite(),
            "suite_seconds": self.suite_seconds,
            "outcomes": [o.to_dict() for o in self.outcomes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        lines = [f"{'test':<20} {'suite':<10} {'verdict':<8} {'p':>12}"]
        for o in self.outcomes:
            p = "-" if o.p is None else f"{o.p:.6g}"
            lines.append(f"{o.test_name:<20} {o.suite:<10} {o.verdict.value:<8} {p:>12}")
        lines.append(f"failed {self.failed} (weak {self.weak}), skipped {self.skipped}, "
                     f"expected false failures {self.expected_false_failures:.3f}")
        return "\n".join(lines)


def run_battery(s: BitString, config: BatteryConfig | None = None, profile: str = "all",
                sample_id: str = "", workers: int = 1) -> BatteryReport:
    """Run every test of ``profile`` on ``s``; outcomes keep the config order."""
    config = config or load_config()
    specs = config.profile(profile)
    if not specs:
        raise ConfigError(f"battery profile {profile!r} enables no tests")

    def timed(spec: TestSpec) -> tuple[TestOutcome, float]:
        start = time.perf_counter()
        out = spec.run(s, sample_id)
        return out, time.perf_counter() - start

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(timed, specs))
    else:
        results = [timed(spec) for spec in specs]
    seconds: dict[str, float] = {}
    for spec, (_, dt) in zip(specs, results):
        seconds[spec.suite] = seconds.get(spec.suite, 0.0) + dt
    return BatteryReport(profile, sample_id, len(s), [o for o, _ in results], seconds)
