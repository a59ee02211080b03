"""Semi-static symbol tables for the block codec.

Signed values use two-sided geometric tables selected per frame from a
fixed family (ratio ``j / 16`` for ``j = 1..15``); values past the direct
range are escaped and their excess magnitude sent as base-128 varint bytes.
Binary flags carry a per-frame frequency.
"""
from functools import lru_cache

import numpy as np

from ..entropy import TOTAL, CorruptStreamError, FrequencyTable, build_freq_table, table_bits, uniform_table

FAMILY = tuple(range(1, 16))
ESC = 15
_W0 = 1 << 40


def _geometric_weights(n, num):
    w = [_W0]
    for _ in range(1, n):
        w.append(max(w[-1] * num // 16, 0))
    return w


@lru_cache(maxsize=None)
def signed_table(index, escape=ESC):
    """Symbols -escape..escape; +-escape mean 'escaped, excess follows'."""
    num = FAMILY[index]
    w = _geometric_weights(escape + 1, num)
    tail = w[escape] * 16 // (16 - num)
    mags = w[:escape] + [tail]
    weights = np.array([mags[abs(s)] for s in range(-escape, escape + 1)], dtype=np.int64)
    return build_freq_table(weights, -escape)


@lru_cache(maxsize=None)
def unsigned_table(index, size):
    return build_freq_table(np.array(_geometric_weights(size, FAMILY[index]), dtype=np.int64), 0)


@lru_cache(maxsize=None)
def bounded_signed_table(index, bound):
    """Symbols -bound..bound, no escape (motion vector differences)."""
    w = _geometric_weights(bound + 1, FAMILY[index])
    weights = np.array(w[::-1][:-1] + w, dtype=np.int64)
    return build_freq_table(weights, -bound)


BYTE_TABLE = uniform_table(0, 256)


def flag_table(freq_one):
    f1 = int(freq_one)
    return FrequencyTable(0, np.array([TOTAL - f1, f1], dtype=np.int64))


def flag_freq(values):
    """Per-frame frequency of the symbol 1, clamped to [1, 2**14 - 1]."""
    v = np.asarray(values).reshape(-1)
    if v.size == 0:
        return TOTAL // 2
    ones = int(np.count_nonzero(v))
    f = (ones * TOTAL * 2 + v.size) // (2 * v.size)
    return min(max(f, 1), TOTAL - 1)


def _cost_signed(values, table, escape):
    v = np.asarray(values, dtype=np.int64).reshape(-1)
    sym = np.clip(v, -escape, escape)
    bits = table_bits(table)[sym + escape]
    return float(bits.sum())


def choose_family(values, kind="signed", size=None, bound=None):
    """Index of the family member with the fewest estimated bits."""
    v = np.asarray(values, dtype=np.int64).reshape(-1)
    if v.size == 0:
        return len(FAMILY) // 2
    best, best_bits = 0, None
    for j in range(len(FAMILY)):
        if kind == "signed":
            b = _cost_signed(v, signed_table(j), ESC)
        elif kind == "unsigned":
            b = float(table_bits(unsigned_table(j, size))[v].sum())
        else:
            b = float(table_bits(bounded_signed_table(j, bound))[v + bound].sum())
        if best_bits is None or b < best_bits:
            best, best_bits = j, b
    return best


def put_signed(enc, value, table, escape=ESC):
    v = int(value)
    if -escape < v < escape:
        enc.put(v, table)
        return
    enc.put(escape if v > 0 else -escape, table)
    m = abs(v) - escape
    while True:
        byte = m & 0x7F
        m >>= 7
        enc.put(byte | (0x80 if m else 0), BYTE_TABLE)
        if not m:
            return


def get_signed(dec, table, escape=ESC):
    v = dec.get(table)
    if -escape < v < escape:
        return v
    m, shift = 0, 0
    while True:
        byte = dec.get(BYTE_TABLE)
        m |= (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            break
        if shift > 28:
            raise CorruptStreamError("escape value too long")
    mag = m + escape
    return mag if v > 0 else -mag
