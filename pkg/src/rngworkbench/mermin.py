"""Three-party Mermin test: correlators, finite-statistics adjustment,
certified min-entropy rate, and a parity-noise record simulator.

Each round records settings x, y (the third setting is x XOR y) and outcome
bits a, b, c. The correlator for a setting is P(a^b^c = 0) - P(a^b^c = 1)
and the Mermin value is E_000 - E_011 - E_101 - E_110.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .bitio import BitString

CLASSICAL_BOUND = 2.0
ALGEBRAIC_MAX = 4.0
SETTINGS = ((0, 0), (0, 1), (1, 0), (1, 1))
# sign of each correlator in the Mermin sum; also the ideal correlator value
SIGNS = {(0, 0): 1, (0, 1): -1, (1, 0): -1, (1, 1): -1}
CSV_HEADER = "x,y,a,b,c"


class MerminError(ValueError):
    pass


@dataclass(frozen=True)
class MerminRecordSet:
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(v, dtype=np.uint8) for v in (self.x, self.y, self.a, self.b, self.c)]
        if len({col.shape for col in cols}) != 1 or cols[0].ndim != 1:
            raise MerminError("record columns must be 1-d and of equal length")
        if any((col > 1).any() for col in cols):
            raise MerminError("record entries must be bits")
        for name, col in zip("xyabc", cols):
            col.setflags(write=False)
            object.__setattr__(self, name, col)

    @property
    def n(self) -> int:
        return self.x.size

    def __len__(self) -> int:
        return self.n

    @classmethod
    def from_rows(cls, rows) -> "MerminRecordSet":
        arr = np.asarray(list(rows), dtype=np.uint8).reshape(-1, 5)
        return cls(*arr.T)


def correlators(r: MerminRecordSet) -> dict[tuple[int, int], float]:
    parity = r.a ^ r.b ^ r.c
    out = {}
    for x, y in SETTINGS:
        mask = (r.x == x) & (r.y == y)
        count = int(mask.sum())
        if count == 0:
            raise MerminError(f"setting ({x},{y}) never occurs")
        ones = int(parity[mask].sum())
        out[(x, y)] = (count - 2 * ones) / count
    return out


def mermin_value(e: dict[tuple[int, int], float]) -> float:
    return sum(SIGNS[k] * e[k] for k in SETTINGS)


def adjust_mermin(m_obs: float, n: int, eps_est: float, hoeffding: str = "standard") -> tuple[float, float]:
    """Return (t, M_adj = M_obs - 16 t).

    ``standard`` solves eps = exp(-2 n t^2); ``printed`` solves the literal
    eps = exp(-2 t / n), kept only for comparison.
    """
    if n < 1:
        raise MerminError("n must be >= 1")
    if not 0 < eps_est < 1:
        raise MerminError("eps_est must lie in (0, 1)")
    log_inv = -math.log(eps_est)
    if hoeffding == "standard":
        t = math.sqrt(log_inv / (2 * n))
    elif hoeffding == "printed":
        t = n * log_inv / 2
    else:
        raise MerminError(f"unknown Hoeffding form {hoeffding!r}")
    return t, m_obs - 16 * t


# -- certified rate -------------------------------------------------------------

_SQRT3 = math.sqrt(3)


def _guess_curve(m: float) -> float:
    """Guessing probability of two outcome bits given Mermin value m (curve part)."""
    return 0.25 * (1 + (1 + _SQRT3) * math.sqrt(max(0.0, 1 - (m / 4) ** 2)))


def _guess_slope(m: float) -> float:
    s = math.sqrt(1 - (m / 4) ** 2)
    return -0.25 * (1 + _SQRT3) * (m / 16) / s


@lru_cache(maxsize=None)
def _tangent_point() -> float:
    # the line from (2, 1) touching the curve; beyond it the curve is the bound
    def gap(m):
        return _guess_curve(m) + _guess_slope(m) * (CLASSICAL_BOUND - m) - 1.0

    return brentq(gap, 2.0 + 1e-9, 4.0 - 1e-9, xtol=1e-14)


def guessing_probability(m: float) -> float:
    """Concave envelope of the guessing bound: 1 up to the classical bound,
    a straight segment to the tangent point, then the analytic curve."""
    if m <= CLASSICAL_BOUND:
        return 1.0
    mt = _tangent_point()
    if m < mt:
        return 1.0 + _guess_slope(mt) * (m - CLASSICAL_BOUND)
    return _guess_curve(m)


def two_bit_rate(m: float) -> float:
    """Min-entropy per retained bit: -log2(P_guess) / 2."""
    return -math.log2(guessing_probability(m)) / 2 + 0.0


RateModel = Callable[[float], float]


def certified_rate(m_adj: float, model: RateModel = two_bit_rate) -> float:
    if math.isnan(m_adj) or not -ALGEBRAIC_MAX <= m_adj <= ALGEBRAIC_MAX:
        raise MerminError(f"Mermin value {m_adj} outside [-4, 4]")
    if m_adj <= CLASSICAL_BOUND:
        return 0.0
    return float(model(m_adj))


@dataclass(frozen=True)
class MerminAssessment:
    E: dict
    M_obs: float
    t: float
    M_adj: float
    eps_est: float
    alpha_Q: float
    n: int
    hoeffding: str = "standard"

    def to_dict(self) -> dict:
        return {
            "E": {f"{x}{y}{x ^ y}": v for (x, y), v in self.E.items()},
            "M_obs": self.M_obs,
            "t": self.t,
            "M_adj": self.M_adj,
            "eps_est": self.eps_est,
            "alpha_Q": self.alpha_Q,
            "n": self.n,
            "hoeffding": self.hoeffding,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def analyze(r: MerminRecordSet, eps_est: float, hoeffding: str = "standard",
            model: RateModel = two_bit_rate) -> MerminAssessment:
    e = correlators(r)
    m_obs = mermin_value(e)
    t, m_adj = adjust_mermin(m_obs, r.n, eps_est, hoeffding)
    alpha = certified_rate(max(-ALGEBRAIC_MAX, m_adj), model)
    return MerminAssessment(e, m_obs, t, m_adj, eps_est, alpha, r.n, hoeffding)


# -- simulation -----------------------------------------------------------------

def simulate_records(v: float, n: int, rng_seed: int) -> MerminRecordSet:
    """Parity-noise model: each round hits its setting's ideal parity with
    probability (1 + v) / 2, giving correlators of magnitude v and M = 4 v."""
    if not 0.0 <= v <= 1.0:
        raise MerminError("visibility must lie in [0, 1]")
    if n < 0:
        raise MerminError("n must be >= 0")
    rng = np.random.default_rng(rng_seed)
    x = rng.integers(0, 2, n, dtype=np.uint8)
    y = rng.integers(0, 2, n, dtype=np.uint8)
    a = rng.integers(0, 2, n, dtype=np.uint8)
    b = rng.integers(0, 2, n, dtype=np.uint8)
    target = ((x | y) != 0).astype(np.uint8)  # parity 0 for (0,0), 1 otherwise
    miss = (rng.random(n) >= (1 + v) / 2).astype(np.uint8)
    c = a ^ b ^ target ^ miss
    return MerminRecordSet(x, y, a, b, c)


def retained_bits(r: MerminRecordSet) -> BitString:
    """a_1 b_1 a_2 b_2 ...; c is discarded."""
    if r.n == 0:
        raise MerminError("empty record set")
    return BitString.from_bits(np.stack([r.a, r.b], axis=1).ravel())


# -- CSV ------------------------------------------------------------------------

def write_records(r: MerminRecordSet, path: str | os.PathLike) -> None:
    rows = np.full((r.n, 10), ord(","), dtype=np.uint8)
    for i, col in enumerate((r.x, r.y, r.a, r.b, r.c)):
        rows[:, 2 * i] = col + ord("0")
    rows[:, 9] = ord("\n")
    with open(path, "wb") as fh:
        fh.write((CSV_HEADER + "\n").encode())
        fh.write(rows.tobytes())


def read_records(path: str | os.PathLike) -> MerminRecordSet:
    data = Path(path).read_bytes().replace(b"\r\n", b"\n")
    head, _, body = data.partition(b"\n")
    if head.decode(errors="replace").replace(" ", "").lower() != CSV_HEADER:
        raise MerminError(f"{path}: expected header {CSV_HEADER!r}, got {head[:40]!r}")
    if body and not body.endswith(b"\n"):
        body += b"\n"
    if len(body) % 10 == 0:
        rows = np.frombuffer(body, dtype=np.uint8).reshape(-1, 10)
        if (rows[:, 1:9:2] == ord(",")).all() and (rows[:, 9] == ord("\n")).all():
            vals = rows[:, 0:9:2].astype(np.int16) - ord("0")
            if ((vals == 0) | (vals == 1)).all():
                return MerminRecordSet(*vals.astype(np.uint8).T)
    # irregular spacing: parse line by line for a precise error
    parsed = []
    for lineno, line in enumerate(body.decode(errors="replace").splitlines(), start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 5 or any(f not in ("0", "1") for f in fields):
            raise MerminError(f"{path}:{lineno}: expected five 0/1 fields, got {line!r}")
        parsed.append([int(f) for f in fields])
    return MerminRecordSet.from_rows(parsed)
