import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnvvc.entropy import (BitstreamChunk, CorruptStreamError, FrequencyTable, RansDecoder, RansEncoder,
                           build_freq_table, estimate_rate, rans_decode, rans_encode, uniform_table)


def random_table(rng, size, rows=None):
    shape = (size,) if rows is None else (rows, size)
    weights = rng.integers(0, 1 << rng.integers(1, 30), shape)
    # sparse tails exercise the min-frequency rule
    weights[rng.random(shape) < 0.3] = 0
    return build_freq_table(weights, int(rng.integers(-130, 10)))


def sample(rng, table, n):
    p = table.freqs / table.freqs.sum(axis=-1, keepdims=True)
    if table.shared:
        return rng.choice(table.size, n, p=p) + table.s_min
    u = rng.random((n, 1))
    return (p.cumsum(axis=1) < u).sum(axis=1).clip(max=table.size - 1) + table.s_min


class TestTables:
    def test_uniform_256(self):
        assert np.all(uniform_table(0, 256).freqs == 64)

    def test_spike(self):
        q = np.zeros(256, dtype=np.int64)
        q[100] = 12345
        f = build_freq_table(q).freqs
        assert f[100] == 2 ** 14 - 255
        assert np.all(np.delete(f, 100) == 1)

    def test_empty_range(self):
        with pytest.raises(ValueError):
            build_freq_table(np.zeros(0, dtype=np.int64))

    def test_floats_rejected(self):
        with pytest.raises(TypeError):
            build_freq_table(np.ones(4))

    def test_largest_index_tiebreak(self):
        # two equal tall bins; the deficit comes from the higher index first
        q = np.zeros(6, dtype=np.int64)
        q[1] = q[4] = 1
        f = build_freq_table(q).freqs
        assert f.tolist() == [1, 8190, 1, 1, 8190, 1]
        q = np.array([0, 1, 0, 1, 0], dtype=np.int64)
        f = build_freq_table(q).freqs
        assert f.tolist() == [1, 8191, 1, 8190, 1]

    @given(st.lists(st.integers(0, 2 ** 40), min_size=1, max_size=300))
    @settings(max_examples=200, deadline=None)
    def test_normalization_invariant(self, weights):
        t = build_freq_table(np.array(weights, dtype=np.int64))
        assert t.freqs.sum() == 16384
        assert t.freqs.min() >= 1
        assert np.all(np.diff(t.cum) > 0)

    def test_rows_match_single(self):
        rng = np.random.default_rng(1)
        q = rng.integers(0, 10 ** 6, (7, 40))
        t = build_freq_table(q)
        for i in range(7):
            assert np.array_equal(t.freqs[i], build_freq_table(q[i]).freqs)

    def test_close_to_proportional(self):
        q = np.array([1000, 3000, 6000], dtype=np.int64)
        f = build_freq_table(q).freqs
        assert np.all(np.abs(f - q / q.sum() * 16384) <= 1)


class TestRans:
    def test_empty(self):
        t = uniform_table(0, 256)
        c = rans_encode([], t)
        assert c.payload == b"" and c.count == 0
        assert len(c.to_bytes()) == 12
        assert rans_decode(c, t).size == 0

    def test_uniform_10000(self):
        rng = np.random.default_rng(0)
        t = uniform_table(0, 256)
        s = rng.integers(0, 256, 10000)
        c = rans_encode(s, t)
        assert 80000 <= c.bits <= 80064
        assert np.array_equal(rans_decode(c, t, 10000), s)

    def test_fuzz_roundtrip(self):
        rng = np.random.default_rng(7)
        for trial in range(200):
            n = int(rng.integers(0, 3000))
            size = int(rng.integers(1, 300))
            table = random_table(rng, size, rows=n if trial % 3 == 0 else None)
            if not table.shared and n == 0:
                continue
            s = sample(rng, table, n)
            c = rans_encode(s, table)
            assert np.array_equal(rans_decode(c, table), s)
            est = estimate_rate(s, table)
            if n >= 1000:
                assert est - 8 <= c.bits <= est + 64

    def test_out_of_range(self):
        t = uniform_table(-2, 4)
        with pytest.raises(ValueError):
            rans_encode([0, 2], t)
        with pytest.raises(ValueError):
            rans_encode([-3], t)

    def test_streaming_matches_batch(self):
        rng = np.random.default_rng(3)
        a, b = random_table(rng, 20), random_table(rng, 50)
        enc = RansEncoder()
        syms = []
        for k in range(500):
            t = a if k % 2 else b
            s = int(sample(rng, t, 1)[0])
            enc.put(s, t)
            syms.append(s)
        chunk = enc.finish()
        dec = RansDecoder(chunk)
        got = [dec.get(a if k % 2 else b) for k in range(500)]
        dec.close()
        assert got == syms

    def test_chunk_bytes_roundtrip(self):
        t = uniform_table(0, 16)
        c = rans_encode(np.arange(16), t)
        c2, off = BitstreamChunk.from_bytes(b"xx" + c.to_bytes(), 2)
        assert off == 2 + 12 + len(c.payload)
        assert c2 == c
        assert c.crc == zlib.crc32(c.payload)

    def test_corruption_detected(self):
        t = uniform_table(0, 256)
        c = rans_encode(np.arange(200) % 256, t)
        raw = bytearray(c.to_bytes())
        raw[20] ^= 0x10
        with pytest.raises(CorruptStreamError):
            BitstreamChunk.from_bytes(bytes(raw))
        with pytest.raises(CorruptStreamError):
            BitstreamChunk.from_bytes(bytes(raw[:-3]))

    def test_wrong_table_size_detected(self):
        # a checksum-valid chunk decoded with the wrong model must not pass silently
        rng = np.random.default_rng(5)
        t = random_table(rng, 64)
        s = sample(rng, t, 2000)
        c = rans_encode(s, t)
        other = uniform_table(t.s_min, 64)
        with pytest.raises(CorruptStreamError):
            rans_decode(c, other)


class TestEstimate:
    def test_half(self):
        t = FrequencyTable(0, np.array([8192, 8192]))
        assert estimate_rate([1], t) == 1.0

    def test_uniform_exact(self):
        t = uniform_table(0, 256)
        assert estimate_rate(np.zeros(37, dtype=int), t) == 8 * 37

    def test_close_to_actual(self):
        rng = np.random.default_rng(11)
        t = random_table(rng, 100)
        s = sample(rng, t, 5000)
        assert abs(rans_encode(s, t).bits - estimate_rate(s, t)) <= 64
