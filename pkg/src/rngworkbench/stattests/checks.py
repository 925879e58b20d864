"""Individual statistical tests.

Each ``*_p`` function takes a BitString and returns a TestOutcome whose
verdict comes from the chosen profile. Inputs too short for a test raise
InsufficientData; a failed precondition that the test itself defines (the
runs frequency prerequisite) yields a skipped outcome instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import chi2 as chi2_dist

from .._backend import kernels
from ..bitio import BitString
from .verdicts import Verdict, VerdictProfile, check_p, get_profile


class InsufficientData(ValueError):
    pass


class UndefinedStatistic(ArithmeticError):
    """Raised when a statistic has a zero denominator (e.g. constant input)."""


@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class

    test_name: str
    statistic: float | None
    p: float | None
    verdict: Verdict
    profile: str = "nist-style"
    suite: str = ""
    sample_id: str = ""
    details: dict = field(default_factory=dict)
    skipped_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "test": self.test_name,
            "suite": self.suite,
            "sample": self.sample_id,
            "statistic": self.statistic,
            "p": self.p,
            "verdict": self.verdict.value,
            "profile": self.profile,
            "details": self.details,
            "skipped_reason": self.skipped_reason,
        }


def _outcome(name: str, statistic: float, p: float, profile, **details) -> TestOutcome:
    prof = get_profile(profile)
    p = check_p(p)
    return TestOutcome(name, float(statistic), p, prof.classify(p), prof.name, details=details)


def _skipped(name: str, reason: str, profile) -> TestOutcome:
    return TestOutcome(name, None, None, Verdict.SKIPPED, get_profile(profile).name,
                       skipped_reason=reason)


def _need(n: int, minimum: int, name: str) -> None:
    if n < minimum:
        raise InsufficientData(f"{name} needs at least {minimum} bits, got {n}")


# -- frequency family -----------------------------------------------------------

def monobit_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    n = len(s)
    _need(n, 100, "monobit")
    total = 2 * s.count_ones() - n
    stat = abs(total) / math.sqrt(n)
    return _outcome("monobit", stat, erfc(stat / math.sqrt(2)), profile, n=n, sum=int(total))


def block_frequency_p(s: BitString, block_len: int = 128,
                      profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    n = len(s)
    if block_len < 1:
        raise ValueError("block_len must be positive")
    _need(n, 100 * block_len, "block_frequency")
    blocks = n // block_len
    ones = s.bits[: blocks * block_len].reshape(blocks, block_len).sum(axis=1, dtype=np.int64)
    pi = ones / block_len
    stat = 4.0 * block_len * float(((pi - 0.5) ** 2).sum())
    p = gammaincc(blocks / 2, stat / 2)
    return _outcome("block_frequency", stat, p, profile, block_len=block_len, blocks=blocks)


def runs_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    n = len(s)
    _need(n, 100, "runs")
    bits = s.bits
    pi = s.count_ones() / n
    tau = 2 / math.sqrt(n)
    if abs(pi - 0.5) >= tau:
        return _skipped("runs", f"frequency prerequisite failed: |pi - 1/2| = {abs(pi - 0.5):.4g} >= {tau:.4g}",
                        profile)
    v = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    q = pi * (1 - pi)
    p = erfc(abs(v - 2 * n * q) / (2 * math.sqrt(2 * n) * q))
    return _outcome("runs", v, p, profile, n=n, pi=pi)


# -- serial ---------------------------------------------------------------------

def _pattern_counts(bits: np.ndarray, m: int) -> np.ndarray:
    """Overlapping m-bit pattern counts with cyclic wrap-around."""
    n = bits.size
    ext = np.concatenate([bits, bits[: m - 1]]).astype(np.int64)
    idx = np.zeros(n, dtype=np.int64)
    for j in range(m):
        idx = (idx << 1) | ext[j:j + n]
    return np.bincount(idx, minlength=1 << m)


def _psi2(counts: np.ndarray, n: int) -> float:
    if counts.size == 1:
        return 0.0
    return float(counts.size / n * (counts.astype(np.float64) ** 2).sum() - n)


def serial_p(s: BitString, m: int = 2, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    """NIST serial test; ``p`` is the first-difference p-value.

    Shorter-pattern counts are marginalised from the m-bit counts, which is
    exact under cyclic wrap-around.
    """
    n = len(s)
    if m < 2:
        raise ValueError("serial test needs m >= 2")
    _need(n, 1000, "serial")
    if m >= math.floor(math.log2(n)) - 2:
        raise InsufficientData(f"serial m={m} needs m < floor(log2 n) - 2 (n={n})")
    counts = _pattern_counts(s.bits, m)
    c1 = counts.reshape(-1, 2).sum(axis=1)
    c2 = c1.reshape(-1, 2).sum(axis=1)
    psi_m, psi_m1, psi_m2 = _psi2(counts, n), _psi2(c1, n), _psi2(c2, n)
    d1 = psi_m - psi_m1
    d2 = psi_m - 2 * psi_m1 + psi_m2
    p1 = gammaincc(2 ** (m - 2), d1 / 2)
    p2 = gammaincc(2 ** (m - 3), d2 / 2)
    return _outcome(f"serial_m{m}", d1, p1, profile, m=m, p2=float(p2), delta2=d2)


def serial2_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    return serial_p(s, 2, profile)


# -- byte-level (ENT family) ----------------------------------------------------

def _bytes_of(s: BitString, name: str) -> np.ndarray:
    n = len(s)
    if n % 8:
        warnings.warn(f"{name}: {n % 8} trailing bits ignored", stacklevel=3)
    return s.packed[: n // 8]


def chi2_bytes_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    """Chi-square of byte frequencies against uniform, 255 degrees of freedom."""
    _need(len(s), 8 * 256 * 5, "chi2_bytes")
    data = _bytes_of(s, "chi2_bytes")
    counts = np.bincount(data, minlength=256)
    expected = data.size / 256
    stat = float(((counts - expected) ** 2).sum() / expected)
    return _outcome("chi2_bytes", stat, chi2_dist.sf(stat, 255), profile, bytes=int(data.size))


PI_COORD_BYTES = 3
PI_RADIUS = 256.0 ** PI_COORD_BYTES - 1


@dataclass(frozen=True)
class EntStatistics:
    entropy: float  # Shannon bits per byte
    mean: float
    pi: float
    pi_points: int
    pi_inside: int
    n_bytes: int
    _scc: float | None = None

    @property
    def scc(self) -> float:
        if self._scc is None:
            raise UndefinedStatistic("serial correlation undefined for constant input")
        return self._scc

    def to_dict(self) -> dict:
        return {
            "entropy": self.entropy,
            "mean": self.mean,
            "pi": self.pi,
            "scc": self._scc,
            "bytes": self.n_bytes,
        }


def _monte_carlo_inside(data: np.ndarray) -> tuple[int, int]:
    points = data.size // (2 * PI_COORD_BYTES)
    if points == 0:
        return 0, 0
    groups = data[: points * 2 * PI_COORD_BYTES].reshape(points, 2, PI_COORD_BYTES).astype(np.int64)
    coords = (groups[..., 0] << 16) | (groups[..., 1] << 8) | groups[..., 2]
    # exact integer comparison: x^2 + y^2 <= R^2 fits comfortably in int64
    r = int(PI_RADIUS)
    inside = int(np.count_nonzero(coords[:, 0] ** 2 + coords[:, 1] ** 2 <= r * r))
    return inside, points


def ent_statistics(s: BitString) -> EntStatistics:
    """Shannon entropy, arithmetic mean, Monte-Carlo pi and cyclic serial correlation of the bytes."""
    _need(len(s), 48, "ent_statistics")
    data = _bytes_of(s, "ent_statistics")
    size = data.size
    counts = np.bincount(data, minlength=256).astype(np.float64)
    probs = counts[counts > 0] / size
    entropy = float(-(probs * np.log2(probs)).sum()) + 0.0
    u = data.astype(np.float64)
    mean = float(u.mean())
    inside, points = _monte_carlo_inside(data)
    t1 = float((u * np.roll(u, -1)).sum())
    t2 = float(u.sum()) ** 2
    t3 = float((u * u).sum())
    denom = size * t3 - t2
    scc = None if denom == 0 else (size * t1 - t2) / denom
    return EntStatistics(entropy, mean, 4.0 * inside / points, points, inside, size, scc)


def ent_mean_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    """Byte mean against 127.5 with the CLT normal approximation."""
    st = ent_statistics(s)
    z = (st.mean - 127.5) / math.sqrt((256 ** 2 - 1) / 12 / st.n_bytes)
    return _outcome("ent_mean", st.mean, erfc(abs(z) / math.sqrt(2)), profile, z=z)


def ent_pi_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    """Points inside the quarter circle against a binomial with rate pi/4."""
    _need(len(s), 8 * 6 * 100, "ent_pi")
    st = ent_statistics(s)
    q = math.pi / 4
    z = (st.pi_inside - st.pi_points * q) / math.sqrt(st.pi_points * q * (1 - q))
    return _outcome("ent_pi", st.pi, erfc(abs(z) / math.sqrt(2)), profile, z=z, points=st.pi_points)


def ent_scc_p(s: BitString, profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    """Serial correlation via the Fisher transform; constant input fails outright."""
    _need(len(s), 8 * 100, "ent_scc")
    st = ent_statistics(s)
    try:
        r = st.scc
    except UndefinedStatistic as exc:
        prof = get_profile(profile)
        return TestOutcome("ent_scc", None, 0.0, Verdict.FAIL, prof.name,
                           details={"error": str(exc)})
    r = min(max(r, -1 + 1e-15), 1 - 1e-15)
    z = math.atanh(r) * math.sqrt(st.n_bytes - 3)
    return _outcome("ent_scc", st.scc, erfc(abs(z) / math.sqrt(2)), profile, z=z)


# -- linear complexity ----------------------------------------------------------

LC_PI = np.array([0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833])


def linear_complexity_p(s: BitString, block_len: int = 500,
                        profile: str | VerdictProfile = "nist-style") -> TestOutcome:
    """NIST linear-complexity test with Berlekamp-Massey per block."""
    if not 500 <= block_len <= 5000:
        raise ValueError("block_len must lie within 500..5000")
    n = len(s)
    _need(n, 100 * block_len, "linear_complexity")
    blocks = n // block_len
    lc = kernels.linear_complexities(s.bits[: blocks * block_len].reshape(blocks, block_len))
    m = block_len
    mu = m / 2 + (9 + (-1) ** (m + 1)) / 36 - (m / 3 + 2 / 9) / 2.0 ** m
    t = (-1) ** m * (lc - mu) + 2 / 9
    edges = np.array([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5])
    # bins: T <= -2.5, (-2.5, -1.5], ..., T > 2.5
    v = np.bincount(np.searchsorted(edges, t, side="left"), minlength=7)
    stat = float(((v - blocks * LC_PI) ** 2 / (blocks * LC_PI)).sum())
    p = gammaincc(3, stat / 2)
    return _outcome("linear_complexity", stat, p, profile, block_len=m, blocks=blocks,
                    bins=v.tolist(), max_lc=int(lc.max()), min_lc=int(lc.min()))
