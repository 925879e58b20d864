"""p-value verdict profiles, NIST-style two-level analysis and error products."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaincc


class Verdict(str, Enum):
    PASS = "pass"
    WEAK = "weak"
    FAIL = "fail"
    SKIPPED = "skipped"


class InvalidPValue(ValueError):
    pass


def check_p(p: float) -> float:
    """Validate a p-value; tiny float overshoot past [0, 1] is clipped."""
    p = float(p)
    if math.isnan(p):
        raise InvalidPValue("p-value is NaN")
    if p < -1e-12 or p > 1 + 1e-12:
        raise InvalidPValue(f"p-value {p} outside [0, 1]")
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class VerdictProfile:
    """Two-tailed pass/weak/fail thresholds for one suite convention.

    ``p`` fails outside ``[fail_lo, fail_hi]``; among the rest it is weak at
    or beyond ``weak_lo``/``weak_hi`` and passes otherwise.
    """

    name: str
    fail_lo: float
    fail_hi: float
    weak_lo: float | None = None
    weak_hi: float | None = None

    def __post_init__(self):
        if not 0 <= self.fail_lo < self.fail_hi <= 1:
            raise ValueError(f"{self.name}: bad fail bounds")
        if (self.weak_lo is None) != (self.weak_hi is None):
            raise ValueError(f"{self.name}: weak bounds come in pairs")
        if self.weak_lo is not None and not self.fail_lo <= self.weak_lo < self.weak_hi <= self.fail_hi:
            raise ValueError(f"{self.name}: weak band must sit inside the non-fail interval")

    def classify(self, p: float) -> Verdict:
        p = check_p(p)
        if p < self.fail_lo or p > self.fail_hi:
            return Verdict.FAIL
        if self.weak_lo is not None and (p <= self.weak_lo or p >= self.weak_hi):
            return Verdict.WEAK
        return Verdict.PASS

    @property
    def fail_mass(self) -> float:
        """Probability of a false failure for a uniformly distributed p."""
        return self.fail_lo + (1.0 - self.fail_hi)

    @property
    def weak_mass(self) -> float:
        if self.weak_lo is None:
            return 0.0
        return (self.weak_lo - self.fail_lo) + (self.fail_hi - self.weak_hi)


PROFILES: dict[str, VerdictProfile] = {
    p.name: p
    for p in (
        VerdictProfile("nist-style", 0.005, 0.995),
        VerdictProfile("dieharder-style", 0.0005, 0.9995, 0.005, 0.995),
        VerdictProfile("testu01-style", 0.001, 0.999),
        VerdictProfile("practrand-style", 1e-11, 1 - 1e-11, 1e-3, 1 - 1e-3),
    )
}

# graded labels for the practrand-style weak band, strictest first
PRACTRAND_GRADES = (
    (1e-11, "FAIL"),
    (1e-9, "very suspicious"),
    (1e-7, "suspicious"),
    (1e-5, "mildly suspicious"),
    (1e-3, "unusual"),
)


def practrand_grade(p: float) -> str:
    tail = min(check_p(p), 1.0 - check_p(p))
    for bound, label in PRACTRAND_GRADES:
        if tail < bound:
            return label
    return "normal"


def get_profile(profile: str | VerdictProfile) -> VerdictProfile:
    if isinstance(profile, VerdictProfile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown verdict profile {profile!r}; known: {sorted(PROFILES)}") from None


def classify(p: float, profile: str | VerdictProfile) -> Verdict:
    return get_profile(profile).classify(p)


@dataclass(frozen=True)
class TwoLevelResult:
    uniformity_p: float
    proportion: float
    proportion_band: tuple[float, float]
    proportion_pass: bool
    uniformity_pass: bool

    @property
    def overall(self) -> bool:
        return self.uniformity_pass and self.proportion_pass


UNIFORMITY_THRESHOLD = 1e-4


def nist_two_level(pvals: Sequence[float], alpha: float = 0.01) -> TwoLevelResult:
    """Second-level analysis of a set of per-substring p-values.

    Uniformity: chi-square of the p-values over ten equal bins, passing at
    ``uniformity_p >= 1e-4``. Proportion: the share of p-values inside
    ``[alpha/2, 1 - alpha/2]`` must fall within ``(1-alpha) +/- 3 sigma``.
    """
    if len(pvals) == 0:
        raise ValueError("no p-values to analyse")
    arr = np.array([check_p(p) for p in pvals])
    s = arr.size
    counts = np.bincount(np.minimum((arr * 10).astype(int), 9), minlength=10)
    expected = s / 10
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    uniformity_p = float(gammaincc(9 / 2, chi2 / 2))
    proportion = float(((arr >= alpha / 2) & (arr <= 1 - alpha / 2)).mean())
    centre = 1 - alpha
    half = 3 * math.sqrt(centre * alpha / s)
    band = (centre - half, centre + half)
    return TwoLevelResult(
        uniformity_p=uniformity_p,
        proportion=proportion,
        proportion_band=band,
        proportion_pass=band[0] <= proportion <= band[1],
        uniformity_pass=uniformity_p >= UNIFORMITY_THRESHOLD,
    )


def combine_type2(per_test: Iterable[float]) -> float:
    """Type-2 error of independent tests all accepting a non-uniform source."""
    out = 1.0
    for value in per_test:
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"type-2 probability {value} outside [0, 1]")
        out *= value
    return out
