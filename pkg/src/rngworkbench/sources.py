"""Reference randomness sources.

* the 32-bit XNOR shift register used as the deliberately weak baseline,
* a seeded biased IID bit simulator,
* a client for the NIST Randomness Beacon (version 2 pulse documents) with
  offline fixture playback.
"""

from __future__ import annotations

import json
import logging
import math
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from ._backend import kernels
from .bitio import BitString

log = logging.getLogger(__name__)

BEACON_ENDPOINT = "https://beacon.nist.gov/beacon/2.0"
PULSE_BITS = 512


@dataclass(frozen=True)
class LfsrSpec:
    """Register width and feedback taps, numbered 1..width as b_1..b_width."""

    width: int
    taps: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.width <= 64:
            raise ValueError("register width must be within 1..64")
        if not self.taps or any(not 1 <= t <= self.width for t in self.taps):
            raise ValueError(f"taps {self.taps} out of range for width {self.width}")

    @property
    def tapmask(self) -> int:
        return sum(1 << (t - 1) for t in set(self.taps))

    @property
    def period_bound(self) -> int:
        return 2 ** self.width - 1


PAPER_LFSR = LfsrSpec(32, (32, 22, 2, 1))
# 8-bit register with the same XNOR step and tap shape (high tap, b_2, b_1); maximal period
LFSR8 = LfsrSpec(8, (8, 7, 2, 1))


def _step(register: int, spec: LfsrSpec) -> int:
    f = ((register & spec.tapmask).bit_count() & 1) ^ 1
    return (register >> 1) | (f << (spec.width - 1))


@dataclass(frozen=True)
class LfsrState:
    """Register contents with b_1 in bit 0; ``step_count`` counts executed steps."""

    register: int
    spec: LfsrSpec = PAPER_LFSR
    step_count: int = 0

    def __post_init__(self):
        if not 0 <= self.register < 1 << self.spec.width:
            raise ValueError("register value does not fit the register width")
        if _step(self.register, self.spec) == self.register:
            raise ValueError(
                f"state {self.register:#x} is the lock-up fixed point of the XNOR update"
            )

    @classmethod
    def from_bits(cls, bits, spec: LfsrSpec = PAPER_LFSR) -> "LfsrState":
        bits = list(bits)
        if len(bits) != spec.width:
            raise ValueError(f"need {spec.width} bits, got {len(bits)}")
        return cls(sum(int(b) << i for i, b in enumerate(bits)), spec)

    @classmethod
    def from_hex(cls, text: str, spec: LfsrSpec = PAPER_LFSR) -> "LfsrState":
        """Parse a hex seed; its most significant bit becomes b_1."""
        value = int(text, 16)
        if value >> spec.width:
            raise ValueError(f"seed {text!r} wider than {spec.width} bits")
        return cls.from_bits([(value >> (spec.width - 1 - i)) & 1 for i in range(spec.width)], spec)

    def bits(self) -> list[int]:
        return [(self.register >> i) & 1 for i in range(self.spec.width)]

    def to_hex(self) -> str:
        value = 0
        for b in self.bits():
            value = (value << 1) | b
        return f"{value:0{(self.spec.width + 3) // 4}X}"


def lfsr_generate(seed_state: LfsrState, n: int) -> BitString:
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = seed_state.spec
    out = kernels.lfsr_bits(seed_state.register, spec.width, spec.tapmask, n)
    return BitString.from_bits(out)


class Lfsr:
    """Stateful wrapper that keeps generating where the last call stopped."""

    def __init__(self, state: LfsrState):
        self.state = state

    def generate(self, n: int) -> BitString:
        spec = self.state.spec
        # the register after n steps is exactly the next `width` output bits
        raw = kernels.lfsr_bits(self.state.register, spec.width, spec.tapmask, n + spec.width)
        nxt = sum(int(b) << i for i, b in enumerate(raw[n:]))
        self.state = LfsrState(nxt, spec, self.state.step_count + n)
        return BitString.from_bits(raw[:n])

    def states(self) -> Iterator[int]:
        """Successive register values, one step at a time (slow; for audits)."""
        reg = self.state.register
        while True:
            yield reg
            reg = _step(reg, self.state.spec)


_IID_CHUNK = 1 << 22


def biased_iid_generate(p0: float, n: int, rng_seed: int) -> BitString:
    """``n`` independent bits, each 0 with probability ``p0``."""
    if not 0.0 < p0 < 1.0 or math.isnan(p0):
        raise ValueError(f"p0 must lie strictly inside (0, 1), got {p0}")
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(rng_seed)
    out = np.empty(n, dtype=np.uint8)
    for start in range(0, n, _IID_CHUNK):
        stop = min(n, start + _IID_CHUNK)
        out[start:stop] = rng.random(stop - start) >= p0
    return BitString.from_bits(out)


def uniform_bits(n: int, rng_seed: int) -> BitString:
    """Seeded uniform fixture bits (PCG64 byte stream)."""
    rng = np.random.default_rng(rng_seed)
    return BitString(rng.bytes((n + 7) // 8), n)


# -- NIST Randomness Beacon -----------------------------------------------------

class BeaconError(RuntimeError):
    pass


@dataclass(frozen=True)
class BeaconPulse:
    pulse_index: int
    output_value: BitString
    timestamp: str

    @classmethod
    def parse(cls, doc: dict | str | bytes) -> "BeaconPulse":
        if isinstance(doc, (str, bytes)):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as exc:
                raise BeaconError(f"malformed pulse document: {exc}") from None
        body = doc.get("pulse", doc) if isinstance(doc, dict) else None
        if not isinstance(body, dict):
            raise BeaconError("malformed pulse document: no pulse object")
        try:
            index = int(body["pulseIndex"])
            value = str(body["outputValue"]).strip()
            stamp = str(body["timeStamp"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BeaconError(f"malformed pulse document: missing or bad field {exc}") from None
        if len(value) != PULSE_BITS // 4:
            raise BeaconError(
                f"malformed pulse document: outputValue has {len(value)} hex characters, expected 128"
            )
        try:
            raw = bytes.fromhex(value)
        except ValueError:
            raise BeaconError("malformed pulse document: outputValue is not hex") from None
        return cls(index, BitString(raw, PULSE_BITS), stamp)

    def to_doc(self) -> dict:
        return {
            "pulse": {
                "pulseIndex": self.pulse_index,
                "outputValue": self.output_value.to_hex(),
                "timeStamp": self.timestamp,
            }
        }


def _http_get(url: str, timeout: float = 10.0) -> bytes:
    req = urllib.request.Request(url, headers={"Accept": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise BeaconError(f"beacon request {url} failed: {exc}") from None


@dataclass
class BeaconClient:
    """Fetches pulses live, or replays them from a recorded fixture file.

    A fixture is a JSON file holding either one pulse document or
    ``{"pulses": [doc, ...]}``; playback hands pulses out in file order.
    """

    endpoint: str = BEACON_ENDPOINT
    fixture: str | os.PathLike | None = None
    transport: Callable[[str], bytes] = _http_get
    _replay: list[dict] | None = field(default=None, init=False, repr=False)
    _cursor: int = field(default=0, init=False, repr=False)

    def _load_fixture(self) -> list[dict]:
        if self._replay is None:
            data = json.loads(Path(self.fixture).read_text())
            self._replay = data["pulses"] if isinstance(data, dict) and "pulses" in data else [data]
        return self._replay

    def fetch(self, pulse: int | None = None) -> BeaconPulse:
        if self.fixture is not None:
            docs = self._load_fixture()
            if pulse is not None:
                for doc in docs:
                    if int(doc.get("pulse", doc).get("pulseIndex", -1)) == pulse:
                        return BeaconPulse.parse(doc)
                raise BeaconError(f"pulse {pulse} not in fixture {self.fixture}")
            if self._cursor >= len(docs):
                raise BeaconError(f"fixture {self.fixture} exhausted after {len(docs)} pulses")
            doc = docs[self._cursor]
            self._cursor += 1
            return BeaconPulse.parse(doc)
        base = self.endpoint.rstrip("/")
        url = f"{base}/pulse/last" if pulse is None else f"{base}/pulse/{pulse}"
        return BeaconPulse.parse(self.transport(url))

    def seed_bits(self, n_bits: int) -> tuple[BitString, list[int]]:
        """Concatenate pulses until ``n_bits`` are available; returns bits and pulse indices."""
        if n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        needed = math.ceil(n_bits / PULSE_BITS)
        pulses = [self.fetch()]
        while len(pulses) < needed:
            if self.fixture is not None:
                pulses.append(self.fetch())
            else:
                pulses.append(self.fetch(pulses[-1].pulse_index - 1))
        bits = np.concatenate([p.output_value.bits for p in pulses])[:n_bits]
        return BitString.from_bits(bits), [p.pulse_index for p in pulses]


def beacon_fetch(endpoint: str = BEACON_ENDPOINT, pulse: int | None = None,
                 fixture: str | os.PathLike | None = None) -> BeaconPulse:
    return BeaconClient(endpoint=endpoint, fixture=fixture).fetch(pulse)


def synthetic_beacon_fixture(path: str | os.PathLike, count: int, rng_seed: int,
                             first_index: int = 1) -> Path:
    """Write a playback fixture of ``count`` pulses with seeded output values.

    Stands in for a recorded beacon session when running offline.
    """
    rng = np.random.default_rng(rng_seed)
    docs = []
    for i in range(count):
        value = rng.bytes(PULSE_BITS // 8).hex().upper()
        docs.append({"pulse": {"pulseIndex": first_index + i, "outputValue": value,
                               "timeStamp": f"1970-01-01T00:{i // 60 % 60:02d}:{i % 60:02d}.000Z"}})
    path = Path(path)
    path.write_text(json.dumps({"pulses": docs}, indent=1))
    return path
