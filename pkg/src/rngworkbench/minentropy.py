"""Min-entropy, a most-common-value estimator and the mean-minus-7-sigma bound."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .bitio import BitString

MCV_Z = 2.576  # two-sided 99% normal quantile
SIGMA_MULTIPLIER = 7.0
# the normal tail at 7 sigma is about 1.28e-12, which the rule rounds to 2^-39
EPS_EST_7SIGMA = 2.0 ** -39


class EntropyError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise EntropyError("distribution needs a nonempty 1-d probability vector")
        if (p < 0).any() or not np.isfinite(p).all():
            raise EntropyError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise EntropyError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size


def min_entropy(d: Distribution) -> float:
    return float(-math.log2(d.probs.max())) + 0.0


def min_entropy_rate(k: float, n: int) -> float:
    if n < 1:
        raise EntropyError("n must be >= 1")
    if not 0 <= k <= n:
        raise EntropyError(f"min-entropy {k} outside [0, {n}]")
    return k / n


def _symbols(s: BitString, symbol_bits: int) -> np.ndarray:
    count = len(s) // symbol_bits
    groups = s.bits[: count * symbol_bits].reshape(count, symbol_bits).astype(np.int64)
    weights = np.int64(1) << np.arange(symbol_bits - 1, -1, -1, dtype=np.int64)
    return groups @ weights


def mcv_from_frequency(p_hat: float, n_symbols: int, symbol_bits: int) -> float:
    """Per-bit estimate from the top symbol frequency with a 99% upper bound."""
    p_u = p_hat + MCV_Z * math.sqrt(p_hat * (1 - p_hat) / n_symbols)
    return -math.log2(min(1.0, p_u)) / symbol_bits + 0.0


def mcv_estimate(s: BitString, symbol_bits: int = 8) -> float:
    """Most-common-value min-entropy estimate in bits per bit."""
    if not 1 <= symbol_bits <= 32:
        raise EntropyError("symbol_bits must lie within 1..32")
    if len(s) < symbol_bits * 1000:
        raise EntropyError(f"need at least {symbol_bits * 1000} bits, got {len(s)}")
    sym = _symbols(s, symbol_bits)
    if symbol_bits <= 20:
        top = int(np.bincount(sym, minlength=1 << symbol_bits).max())
    else:
        top = int(np.unique(sym, return_counts=True)[1].max())
    return mcv_from_frequency(top / sym.size, sym.size, symbol_bits)


def sample_sigma(estimates: Sequence[float]) -> float:
    """Sample standard deviation with Bessel's correction."""
    est = np.asarray(estimates, dtype=np.float64)
    if est.size < 2:
        raise EntropyError("need at least two estimates")
    return float(est.std(ddof=1))


@dataclass
class EntropyAssessment:
    per_sample_estimates: list[float]
    mean_est: float
    sigma: float
    alpha: float
    eps_est: float
    z: float = SIGMA_MULTIPLIER
    clipped: bool = False
    unclipped_alpha: float | None = None
    symbol_bits: int | None = None
    samples: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["log2_eps_est"] = math.log2(self.eps_est)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "EntropyAssessment":
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in doc.items() if k in names})


def tail_probability(z: float) -> float:
    """One-sided normal tail; the 7-sigma case reports the rounded 2^-39."""
    if z == SIGMA_MULTIPLIER:
        return EPS_EST_7SIGMA
    return float(norm.sf(z))


def lower_bound_alpha(estimates: Sequence[float], z: float = SIGMA_MULTIPLIER) -> EntropyAssessment:
    """alpha = mean - z * sigma over per-sample rate estimates, clipped to [0, 1]."""
    est = [float(e) for e in estimates]
    for e in est:
        if not 0.0 <= e <= 1.0 or math.isnan(e):
            raise EntropyError(f"estimate {e} outside [0, 1]")
    if z <= 0:
        raise EntropyError("sigma multiplier must be positive")
    sigma = sample_sigma(est)
    mean = math.fsum(est) / len(est)
    raw = mean - z * sigma
    alpha = min(1.0, max(0.0, raw))
    return EntropyAssessment(
        per_sample_estimates=est,
        mean_est=mean,
        sigma=sigma,
        alpha=alpha,
        eps_est=tail_probability(z),
        z=z,
        clipped=alpha != raw,
        unclipped_alpha=raw,
    )


def assess_samples(samples: dict[str, BitString], symbol_bits: int = 8,
                   z: float = SIGMA_MULTIPLIER) -> EntropyAssessment:
    """MCV estimate per sample, then the lower bound over the set."""
    names = sorted(samples)
    result = lower_bound_alpha([mcv_estimate(samples[k], symbol_bits) for k in names], z)
    result.symbol_bits = symbol_bits
    result.samples = names
    return result
