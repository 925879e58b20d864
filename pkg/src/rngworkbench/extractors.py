"""Von Neumann and Circulant extractors, output-length and error bookkeeping.

The Circulant construction: pad the n-bit input x with one zero to length
p = n + 1 (p prime), take the GF(2) cyclic convolution with the p-bit seed y
and keep the first m bits. ``circulant_reference`` is the normative O(p^2)
definition; ``circulant_core`` is the transform-accelerated path and must
agree with it bit for bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._backend import kernels
from .bitio import BitString

BUDGET = 2.0 ** -32
DEFAULT_EPS_ROUND = 2.0 ** -64
DEFAULT_MARGIN = 0.02
SEED_BITS = 10007
BLOCK_BITS = SEED_BITS - 1


class ExtractorKind(str, Enum):
    VON_NEUMANN = "von-neumann"
    SEEDED = "circulant-seeded"
    TWO_SOURCE = "circulant-two-source"

    @classmethod
    def parse(cls, value: "str | ExtractorKind") -> "ExtractorKind":
        if isinstance(value, cls):
            return value
        aliases = {"vn": cls.VON_NEUMANN, "seeded": cls.SEEDED, "two-source": cls.TWO_SOURCE}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown extractor kind {value!r}") from None


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def largest_prime_at_most(n: int) -> int:
    for candidate in range(n, 1, -1):
        if is_prime(candidate):
            return candidate
    raise ValueError(f"no prime <= {n}")


# -- Von Neumann ----------------------------------------------------------------

def von_neumann(s: BitString) -> BitString:
    """First bit of every discordant pair; an odd trailing bit is dropped."""
    bits = s.bits
    pairs = bits[: len(bits) // 2 * 2].reshape(-1, 2)
    return BitString.from_bits(pairs[pairs[:, 0] != pairs[:, 1], 0])


# -- Circulant ------------------------------------------------------------------

def _check_circulant(n: int, p: int, m: int) -> None:
    if p != n + 1:
        raise ValueError(f"seed must be one bit longer than the input ({n} + 1), got {p}")
    if not is_prime(p):
        raise ValueError(f"seed length {p} is not prime")
    # the kernel may return the whole cyclic product (m = p); jobs cap m at n
    if not 1 <= m <= p:
        raise ValueError(f"output length {m} outside 1..{p}")


def circulant_reference(x: BitString, y: BitString, m: int) -> BitString:
    """c_k = XOR_j x'_j y_{(k-j) mod p}, evaluated directly from the definition."""
    n, p = len(x), len(y)
    _check_circulant(n, p, m)
    xp = np.zeros(p, dtype=np.uint8)
    xp[:n] = x.bits
    yb = y.bits.astype(np.int64)
    k = np.arange(p)
    c = np.zeros(p, dtype=np.int64)
    for j in np.flatnonzero(xp):
        c += yb[(k - j) % p]
    return BitString.from_bits((c & 1)[:m])


def circulant_many(xs: np.ndarray, y: BitString, m: int) -> np.ndarray:
    """Batch form: rows of ``xs`` (k, n) share the seed ``y``; returns (k, m) bits."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
    n, p = xs.shape[1], len(y)
    _check_circulant(n, p, m)
    padded = np.zeros((xs.shape[0], p), dtype=np.uint8)
    padded[:, :n] = xs
    return kernels.cyclic_convolve_gf2(padded, y.bits)[:, :m]


def circulant_core(x: BitString, y: BitString, m: int) -> BitString:
    return BitString.from_bits(circulant_many(x.bits[None, :], y, m)[0])


# -- parameters -----------------------------------------------------------------

def output_length(kind: "str | ExtractorKind", n: int, k1: float, k2: float | None,
                  eps: float) -> int:
    """m = max(0, floor(k1 + k2 - (n+1) - 2 log2(1/eps))); seeded sets k2 = n+1."""
    kind = ExtractorKind.parse(kind)
    if kind is ExtractorKind.VON_NEUMANN:
        raise ValueError("Von Neumann output length is data dependent")
    if kind is ExtractorKind.SEEDED:
        k2 = n + 1
    if k2 is None:
        raise ValueError("two-source extraction needs k2")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k1 <= n:
        raise ValueError(f"k1={k1} outside [0, {n}]")
    if not 0 <= k2 <= n + 1:
        raise ValueError(f"k2={k2} outside [0, {n + 1}]")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    # a relative nudge absorbs float noise such as 0.02 * 10007 landing just under an integer
    raw = k1 + k2 - (n + 1) + 2 * math.log2(eps)
    return max(0, math.floor(raw + 1e-9 * max(1.0, abs(raw))))


@dataclass(frozen=True)
class ExtractorJob:
    kind: ExtractorKind
    n_input: int
    n_seed: int
    k1: float
    k2: float
    eps_round: float
    m_out: int

    def __post_init__(self):
        if self.kind is not ExtractorKind.VON_NEUMANN:
            if self.n_seed != self.n_input + 1 or not is_prime(self.n_seed):
                raise ValueError("circulant jobs need a prime seed one bit longer than the input")
            if not 0 <= self.m_out <= self.n_input:
                raise ValueError("m_out outside [0, n_input]")
        elif self.m_out < 0:
            raise ValueError("m_out must be >= 0")

    @classmethod
    def plan(cls, kind: "str | ExtractorKind", n: int, k1: float, k2: float | None = None,
             eps_round: float = DEFAULT_EPS_ROUND) -> "ExtractorJob":
        kind = ExtractorKind.parse(kind)
        m = output_length(kind, n, k1, k2, eps_round)
        k2 = float(n + 1) if kind is ExtractorKind.SEEDED else float(k2)
        return cls(kind, n, n + 1, float(k1), k2, eps_round, m)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n_input": self.n_input, "n_seed": self.n_seed,
                "k1": self.k1, "k2": self.k2, "eps_round": self.eps_round, "m_out": self.m_out}


@dataclass(frozen=True)
class EpsilonBudget:
    """Composed error; ``per_round`` is run-length coded as (round count, eps) groups."""

    eps_est: float
    per_round: tuple[tuple[int, float], ...] = ()
    limit: float = BUDGET
    extra: tuple[tuple[str, float], ...] = field(default=())

    @property
    def rounds(self) -> int:
        return sum(count for count, _ in self.per_round)

    @property
    def eps_total(self) -> float:
        return math.fsum([self.eps_est, *(c * e for c, e in self.per_round), *(e for _, e in self.extra)])

    @property
    def satisfied(self) -> bool:
        return self.eps_total <= self.limit

    def to_dict(self) -> dict:
        return {
            "eps_est": self.eps_est,
            "per_round": [{"rounds": c, "eps": e} for c, e in self.per_round],
            "extra": dict(self.extra),
            "eps_total": self.eps_total,
            "log2_eps_total": math.log2(self.eps_total) if self.eps_total > 0 else None,
            "limit": self.limit,
            "satisfied": self.satisfied,
        }


def eps_budget(eps_est: float, rounds: int, eps_round: float) -> EpsilonBudget:
    if not 0 < eps_est < 1:
        raise ValueError("eps_est must lie in (0, 1)")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if rounds and not 0 < eps_round < 1:
        raise ValueError("eps_round must lie in (0, 1)")
    return EpsilonBudget(eps_est, ((rounds, eps_round),) if rounds else ())


# -- toy strongness demonstration ------------------------------------------------

def seeded_strong_distance(support: list[int], n: int, m: int) -> float:
    """Exact distance of (Ext(X, Y), Y) from (U_m, Y) for X flat on ``support``.

    Enumerates every seed, so only toy sizes (n + 1 around 5) are practical.
    """
    p = n + 1
    if not support:
        raise ValueError("support must be nonempty")
    total = 0.0
    px = 1.0 / len(support)
    for seed in itertools.product((0, 1), repeat=p):
        y = BitString.from_bits(seed)
        counts = np.zeros(1 << m)
        for value in support:
            x = BitString.from_bits([(value >> (n - 1 - i)) & 1 for i in range(n)])
            out = circulant_reference(x, y, m).bits
            counts[int("".join(map(str, out)) or "0", 2)] += px
        total += 0.5 * np.abs(counts - 1.0 / (1 << m)).sum()
    return total / (1 << p)
