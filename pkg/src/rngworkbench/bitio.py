"""Packed bit strings and the three on-disk stream formats.

Bits are packed MSB-first: bit ``i`` of a stream is bit ``i % 8`` of byte
``i // 8``, counted from the most significant position. Raw and hex files
carry no header and always hold whole bytes; when the bit length is not a
multiple of eight the true length lives in a JSON sidecar next to the payload
(``<path>.meta.json``).
"""

from __future__ import annotations

import enum
import json
import logging
import os
import string
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

CHUNK_BYTES = 1 << 20

_WHITESPACE = frozenset(string.whitespace.encode())


class BitIOError(ValueError):
    """Malformed or unusable bit-stream input."""


class StreamFormat(str, enum.Enum):
    RAW = "raw"
    ASCII01 = "ascii01"
    HEX = "hex"

    @classmethod
    def parse(cls, value: "str | StreamFormat") -> "StreamFormat":
        if isinstance(value, cls):
            return value
        aliases = {"raw-binary": "raw", "bin": "raw", "ascii": "ascii01", "txt": "ascii01"}
        try:
            return cls(aliases.get(value, value))
        except ValueError:
            raise BitIOError(f"unknown stream format {value!r}") from None


class BitString:
    """Immutable packed bit sequence with an explicit length.

    Pad bits in the final byte are always zero. ``bits`` exposes a read-only
    ``uint8`` array of 0/1 values and is computed once.
    """

    __slots__ = ("_packed", "_n", "_bits")

    def __init__(self, packed: bytes | np.ndarray, n: int):
        buf = np.frombuffer(bytes(packed), dtype=np.uint8).copy()
        if n < 0 or n > 8 * len(buf):
            raise ValueError(f"bit length {n} does not fit in {len(buf)} bytes")
        nbytes = (n + 7) // 8
        buf = buf[:nbytes]
        if n % 8:
            buf[-1] &= (0xFF << (8 - n % 8)) & 0xFF
        buf.setflags(write=False)
        self._packed = buf
        self._n = n
        self._bits: np.ndarray | None = None

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "BitString":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            arr = arr.ravel()
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        out = cls(np.packbits(arr), int(arr.size))
        arr = arr.copy()
        arr.setflags(write=False)
        out._bits = arr
        return out

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        """Build from a literal such as ``"0110"`` (whitespace ignored)."""
        cleaned = "".join(text.split())
        if set(cleaned) - {"0", "1"}:
            raise ValueError(f"not a 0/1 literal: {text!r}")
        return cls.from_bits(np.frombuffer(cleaned.encode(), dtype=np.uint8) - ord("0"))

    @classmethod
    def empty(cls) -> "BitString":
        return cls(b"", 0)

    @property
    def bits(self) -> np.ndarray:
        if self._bits is None:
            arr = np.unpackbits(self._packed, count=self._n)
            arr.setflags(write=False)
            self._bits = arr
        return self._bits

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    def to_bytes(self) -> bytes:
        return self._packed.tobytes()

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, item):
        if isinstance(item, slice):
            return BitString.from_bits(self.bits[item])
        return int(self.bits[item])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._packed, other._packed)

    def __hash__(self) -> int:
        return hash((self._n, self._packed.tobytes()))

    def __add__(self, other: "BitString") -> "BitString":
        return concat([self, other])

    def __repr__(self) -> str:
        if self._n <= 64:
            return f"BitString('{self.to01()}')"
        return f"BitString(n={self._n}, head='{self[:32].to01()}...')"

    def to01(self) -> str:
        return (self.bits + ord("0")).tobytes().decode()

    def to_hex(self) -> str:
        return self.to_bytes().hex().upper()

    def count_ones(self) -> int:
        return int(self.bits.sum(dtype=np.int64))


def concat(parts: Sequence[BitString]) -> BitString:
    if not parts:
        return BitString.empty()
    if all(len(p) % 8 == 0 for p in parts[:-1]):
        n = sum(len(p) for p in parts)
        return BitString(b"".join(p.to_bytes() for p in parts), n)
    return BitString.from_bits(np.concatenate([p.bits for p in parts]))


def split_blocks(s: BitString, block_len: int) -> tuple[list[BitString], int]:
    """Cut ``s`` into consecutive full blocks.

    Returns the blocks and the number of discarded tail bits. The tail is
    never padded.
    """
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    count = len(s) // block_len
    tail = len(s) - count * block_len
    if count == 0:
        log.warning("input of %d bits holds no full %d-bit block", len(s), block_len)
    bits = s.bits
    blocks = [BitString.from_bits(bits[i * block_len:(i + 1) * block_len]) for i in range(count)]
    if tail:
        log.info("discarding %d tail bits", tail)
    return blocks, tail


# -- decoding -----------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _decode_ascii01(chunk: bytes, offset: int) -> np.ndarray:
    arr = np.frombuffer(chunk, dtype=np.uint8)
    keep = ~np.isin(arr, list(_WHITESPACE))
    vals = arr[keep]
    bad = np.flatnonzero((vals != 0x30) & (vals != 0x31))
    if bad.size:
        pos = np.flatnonzero(keep)[bad[0]]
        raise BitIOError(f"malformed ascii01 character {chr(arr[pos])!r} at byte offset {offset + pos}")
    return vals - 0x30


_HEX_LUT = np.full(256, 255, dtype=np.uint8)
for _i, _c in enumerate("0123456789abcdef"):
    _HEX_LUT[ord(_c)] = _i
    _HEX_LUT[ord(_c.upper())] = _i


def _decode_hex(chunk: bytes, offset: int) -> np.ndarray:
    """Return nibble values (0..15) of the non-whitespace characters."""
    arr = np.frombuffer(chunk, dtype=np.uint8)
    keep = ~np.isin(arr, list(_WHITESPACE))
    nib = _HEX_LUT[arr[keep]]
    bad = np.flatnonzero(nib == 255)
    if bad.size:
        pos = np.flatnonzero(keep)[bad[0]]
        raise BitIOError(f"malformed hex character {chr(arr[pos])!r} at byte offset {offset + pos}")
    return nib


def stream_bits(path: str | os.PathLike, fmt: StreamFormat | str = StreamFormat.RAW,
                max_bits: int | None = None, chunk_bytes: int = CHUNK_BYTES) -> Iterator[BitString]:
    """Yield the file's bits in order, one bounded chunk at a time."""
    fmt = StreamFormat.parse(fmt)
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    limit = max_bits
    if fmt is not StreamFormat.ASCII01:
        meta = _sidecar(path)
        if meta.exists():
            true_n = int(json.loads(meta.read_text())["bits"])
            limit = true_n if limit is None else min(limit, true_n)
    remaining = limit
    offset = 0
    pending_nibble: int | None = None
    with path.open("rb") as fh:
        while remaining is None or remaining > 0:
            chunk = fh.read(chunk_bytes)
            if not chunk:
                break
            if fmt is StreamFormat.RAW:
                bits = np.unpackbits(np.frombuffer(chunk, dtype=np.uint8))
            elif fmt is StreamFormat.ASCII01:
                bits = _decode_ascii01(chunk, offset)
            else:
                nib = _decode_hex(chunk, offset)
                if pending_nibble is not None:
                    nib = np.concatenate([[pending_nibble], nib]).astype(np.uint8)
                    pending_nibble = None
                if nib.size % 2:
                    pending_nibble = int(nib[-1])
                    nib = nib[:-1]
                bits = np.unpackbits(((nib[0::2] << 4) | nib[1::2]).astype(np.uint8))
            offset += len(chunk)
            if remaining is not None:
                bits = bits[:remaining]
                remaining -= bits.size
            if bits.size:
                yield BitString.from_bits(bits)
    if pending_nibble is not None and remaining != 0:
        raise BitIOError(f"hex input {path} has an odd number of characters")


def read_bits(path: str | os.PathLike, fmt: StreamFormat | str = StreamFormat.RAW,
              max_bits: int | None = None) -> BitString:
    parts = list(stream_bits(path, fmt, max_bits))
    out = concat(parts)
    if len(out) == 0:
        raise BitIOError(f"{path} holds no bits")
    return out


def encode(s: BitString, fmt: StreamFormat | str) -> bytes:
    fmt = StreamFormat.parse(fmt)
    if fmt is StreamFormat.RAW:
        return s.to_bytes()
    if fmt is StreamFormat.ASCII01:
        return s.to01().encode()
    return s.to_hex().encode()


def decode(data: bytes, fmt: StreamFormat | str, n: int | None = None) -> BitString:
    fmt = StreamFormat.parse(fmt)
    if fmt is StreamFormat.RAW:
        return BitString(data, 8 * len(data) if n is None else n)
    if fmt is StreamFormat.ASCII01:
        bits = _decode_ascii01(data, 0)
    else:
        nib = _decode_hex(data, 0)
        if nib.size % 2:
            raise BitIOError("hex input has an odd number of characters")
        bits = np.unpackbits(((nib[0::2] << 4) | nib[1::2]).astype(np.uint8))
    return BitString.from_bits(bits if n is None else bits[:n])


def write_bits(s: BitString, path: str | os.PathLike, fmt: StreamFormat | str = StreamFormat.RAW) -> None:
    fmt = StreamFormat.parse(fmt)
    if len(s) == 0:
        raise BitIOError("refusing to write an empty bit string")
    path = Path(path)
    path.write_bytes(encode(s, fmt))
    meta = _sidecar(path)
    if fmt is not StreamFormat.ASCII01 and len(s) % 8:
        meta.write_text(json.dumps({"bits": len(s), "format": fmt.value}))
    elif meta.exists():
        meta.unlink()
