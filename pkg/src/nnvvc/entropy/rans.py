"""Byte-wise rANS with a 32-bit state and 14-bit frequency precision.

Symbols are pushed in reverse so the decoder emits them in forward order.
A chunk is ``count u32 | length u32 | crc32 u32 | payload`` little-endian.
"""
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .tables import PRECISION, TOTAL

RANS_L = 1 << 23
_MASK = TOTAL - 1
_HEADER = struct.Struct("<III")


class CorruptStreamError(ValueError):
    """Checksum mismatch, truncation or an impossible decoder state."""


@dataclass(frozen=True)
class BitstreamChunk:
    count: int
    payload: bytes
    crc: int = None

    def __post_init__(self):
        if self.crc is None:
            object.__setattr__(self, "crc", zlib.crc32(self.payload) & 0xFFFFFFFF)

    @property
    def bits(self):
        return 8 * len(self.payload)

    def verify(self):
        if zlib.crc32(self.payload) & 0xFFFFFFFF != self.crc:
            raise CorruptStreamError("chunk checksum mismatch")

    def to_bytes(self):
        return _HEADER.pack(self.count, len(self.payload), self.crc) + self.payload

    @classmethod
    def from_bytes(cls, buf, offset=0):
        """Parse one chunk at ``offset``; returns ``(chunk, next_offset)``."""
        if len(buf) - offset < _HEADER.size:
            raise CorruptStreamError("truncated chunk header")
        count, length, crc = _HEADER.unpack_from(buf, offset)
        start = offset + _HEADER.size
        if len(buf) - start < length:
            raise CorruptStreamError("truncated chunk payload")
        chunk = cls(count, bytes(buf[start:start + length]), crc)
        chunk.verify()
        return chunk, start + length


def _symbol_params(symbols, tables):
    """Per-symbol (start, freq) as Python int lists, range-checked."""
    s = np.asarray(symbols, dtype=np.int64).reshape(-1)
    idx = s - tables.s_min
    if s.size and (idx.min() < 0 or idx.max() >= tables.size):
        bad = s[(idx < 0) | (idx >= tables.size)][0]
        raise ValueError(f"symbol {int(bad)} outside table range [{tables.s_min}, {tables.s_max}]")
    if tables.shared:
        starts = tables.cum[idx]
        freqs = tables.freqs[idx]
    else:
        if len(tables) != s.size:
            raise ValueError(f"{len(tables)} tables for {s.size} symbols")
        rows = np.arange(s.size)
        starts = tables.cum[rows, idx]
        freqs = tables.freqs[rows, idx]
    return starts.tolist(), freqs.tolist()


class RansEncoder:
    """Streaming encoder. ``put`` in forward order, ``finish`` reverses internally."""

    def __init__(self):
        self._ops = []

    def put(self, symbol, table):
        i = symbol - table.s_min
        if not 0 <= i < table.size:
            raise ValueError(f"symbol {symbol} outside table range [{table.s_min}, {table.s_max}]")
        self._ops.append((int(table.cum[i]), int(table.freqs[i])))

    def put_many(self, symbols, table):
        starts, freqs = _symbol_params(symbols, table)
        self._ops.extend(zip(starts, freqs))

    def __len__(self):
        return len(self._ops)

    def finish(self):
        starts, freqs = zip(*self._ops) if self._ops else ((), ())
        return BitstreamChunk(len(self._ops), _encode(starts, freqs))


def _encode(starts, freqs):
    if not starts:
        return b""
    out = bytearray()
    x = RANS_L
    scale = (RANS_L >> PRECISION) << 8
    for i in range(len(starts) - 1, -1, -1):
        f = freqs[i]
        x_max = scale * f
        while x >= x_max:
            out.append(x & 0xFF)
            x >>= 8
        x = ((x // f) << PRECISION) + (x % f) + starts[i]
    out.extend((x & 0xFF, x >> 8 & 0xFF, x >> 16 & 0xFF, x >> 24 & 0xFF))
    out.reverse()
    return bytes(out)


class RansDecoder:
    """Streaming decoder; the caller may choose each symbol's table on the fly."""

    def __init__(self, chunk):
        chunk.verify()
        self.payload = chunk.payload
        self.remaining = chunk.count
        if chunk.count == 0:
            if chunk.payload:
                raise CorruptStreamError("payload present for an empty chunk")
            self.x, self.pos = RANS_L, 0
            return
        if len(chunk.payload) < 4:
            raise CorruptStreamError("payload shorter than the rANS state")
        self.x = int.from_bytes(chunk.payload[:4], "big")
        self.pos = 4
        if not RANS_L <= self.x < RANS_L << 8:
            raise CorruptStreamError("initial rANS state out of range")

    def _advance(self, start, freq, slot):
        x = freq * (self.x >> PRECISION) + slot - start
        p = self.payload
        pos = self.pos
        while x < RANS_L:
            if pos >= len(p):
                raise CorruptStreamError("rANS state underflow: payload exhausted")
            x = (x << 8) | p[pos]
            pos += 1
        self.x, self.pos = x, pos

    def get(self, table):
        """Decode one symbol coded with shared ``table``."""
        if self.remaining <= 0:
            raise CorruptStreamError("more symbols requested than the chunk declares")
        slot = self.x & _MASK
        i = table.lookup()[slot]
        self._advance(int(table.cum[i]), int(table.freqs[i]), slot)
        self.remaining -= 1
        return i + table.s_min

    def get_row(self, table, row):
        """Decode one symbol with row ``row`` of a per-element table."""
        if self.remaining <= 0:
            raise CorruptStreamError("more symbols requested than the chunk declares")
        slot = self.x & _MASK
        cum = table.cum[row]
        i = int(np.searchsorted(cum, slot, side="right")) - 1
        self._advance(int(cum[i]), int(table.freqs[row, i]), slot)
        self.remaining -= 1
        return i + table.s_min

    def close(self):
        """Check the stream ended exactly where the encoder started."""
        if self.remaining != 0:
            raise CorruptStreamError(f"{self.remaining} declared symbols were not decoded")
        if self.x != RANS_L or self.pos != len(self.payload):
            raise CorruptStreamError("rANS final state mismatch (corrupt or mismatched tables)")


def rans_encode(symbols, tables):
    """Encode a symbol sequence; ``tables`` is shared or has one row per symbol."""
    starts, freqs = _symbol_params(symbols, tables)
    return BitstreamChunk(len(starts), _encode(starts, freqs))


def rans_decode(chunk, tables, count=None):
    if count is not None and count != chunk.count:
        raise CorruptStreamError(f"chunk declares {chunk.count} symbols, caller expects {count}")
    if not tables.shared and len(tables) != chunk.count:
        raise ValueError(f"{len(tables)} tables for {chunk.count} symbols")
    dec = RansDecoder(chunk)
    n = chunk.count
    out = np.empty(n, dtype=np.int64)
    if tables.shared:
        lookup = tables.lookup()
        cum = tables.cum.tolist()
        freqs = tables.freqs.tolist()
        x, pos, p = dec.x, dec.pos, dec.payload
        plen = len(p)
        for k in range(n):
            slot = x & _MASK
            i = lookup[slot]
            x = freqs[i] * (x >> PRECISION) + slot - cum[i]
            while x < RANS_L:
                if pos >= plen:
                    raise CorruptStreamError("rANS state underflow: payload exhausted")
                x = (x << 8) | p[pos]
                pos += 1
            out[k] = i
        dec.x, dec.pos, dec.remaining = x, pos, 0
        out += tables.s_min
    else:
        for k in range(n):
            out[k] = dec.get_row(tables, k)
    dec.close()
    return out


def estimate_rate(symbols, tables):
    """Ideal code length in bits: sum of -log2(freq / 2**14)."""
    _, freqs = _symbol_params(symbols, tables)
    if not freqs:
        return 0.0
    f = np.asarray(freqs, dtype=np.float64)
    return float(np.sum(PRECISION - np.log2(f)))


def table_bits(table):
    """-log2 p for every bin of ``table`` (same shape as its freqs)."""
    return PRECISION - np.log2(table.freqs.astype(np.float64))


