import hashlib

import numpy as np
import pytest

from nnvvc.adapters import SideInfo
from nnvvc.pipeline import (FLAG_FALLBACK, NO_MODEL, ROLE_INTER_CVC, ROLE_INTRA_CVC, ROLE_INTRA_LIC,
                            BitstreamError, EncodeConfig, Models, bits_per_pixel, decide_fallback, demux,
                            derive_qps, mux, resample_decision, round_even, vcm_decode, vcm_decode_full,
                            vcm_encode)
from tiny import clip, tiny_models


@pytest.fixture(scope="module")
def models():
    return tiny_models()


def digest(frames):
    return hashlib.sha256(b"".join(np.ascontiguousarray(f).tobytes() for f in frames)).hexdigest()


class TestRateControl:
    def test_offset(self):
        assert derive_qps(37) == (32, 37)

    def test_clamp(self):
        assert derive_qps(3) == (0, 3)
        assert derive_qps(0) == (0, 0)
        assert derive_qps(63) == (58, 63)
        with pytest.raises(ValueError):
            derive_qps(64)

    def test_fallback_threshold(self):
        assert not decide_fallback(49)
        assert decide_fallback(50)
        assert decide_fallback(derive_qps(55)[0])
        assert not decide_fallback(derive_qps(54)[0])


class TestResampling:
    def test_limit_untouched(self):
        assert resample_decision(1920, 1080) == (False, (1920, 1080))

    def test_uhd(self):
        assert resample_decision(3840, 2160) == (True, (2880, 1620))

    def test_round_even(self):
        assert round_even(3 * 1100, 4) == 826  # 825 -> nearest even, halves up
        assert round_even(3 * 1000, 4) == 750

    def test_restore_original_size(self, models):
        frames = clip(1, 3, 20, 1100 // 10)
        cfg = EncodeConfig(37, 8, resample_limit=(100, 100))
        bs = vcm_encode(frames, cfg, models)
        assert bs.resampled and bs.coded_size == (round_even(3 * 110, 4), round_even(3 * 20, 4))
        out = vcm_decode(mux(bs), models)
        assert all(f.shape == (3, 20, 110) for f in out)


class TestHybrid:
    def test_roles_and_roundtrip(self, models):
        frames = clip(2, 6)
        bs = vcm_encode(frames, EncodeConfig(32, 4), models)
        assert [f.role for f in bs.frames] == [ROLE_INTRA_LIC, 1, 1, 1, ROLE_INTRA_LIC, 1]
        assert bs.frames[0].model_id == 27 and bs.frames[0].qp == 27
        data = mux(bs)
        assert mux(demux(data)) == data
        out = vcm_decode(data, models)
        assert len(out) == 6 and all(f.shape == frames[0].shape and f.dtype == np.uint8 for f in out)

    def test_two_decode_paths(self, models):
        bs = vcm_encode(clip(3, 5), EncodeConfig(37, 4), models)
        a = vcm_decode_full(bs, models, path="reencode")
        b = vcm_decode_full(bs, models, path="inject")
        assert digest(a.pre_adapter) == digest(b.pre_adapter)
        assert digest(a.frames) == digest(b.frames)

    def test_decoder_matches_encoder_references(self, models):
        frames = clip(4, 3)
        res = vcm_decode_full(vcm_encode(frames, EncodeConfig(32, 8), models), models)
        iha = models.iha.apply(res.intra_lic[0], SideInfo(27, 56, 40))
        assert np.array_equal(res.references[0], iha)

    def test_no_iha_flag(self, models):
        frames = clip(5, 3)
        res = vcm_decode_full(vcm_encode(frames, EncodeConfig(32, 8, use_iha=False), models), models)
        assert np.array_equal(res.references[0], res.intra_lic[0])

    def test_no_ima_leaves_inter_frames(self, models):
        frames = clip(6, 3)
        res = vcm_decode_full(vcm_encode(frames, EncodeConfig(32, 8, use_ima=False), models), models)
        assert all(np.array_equal(a, b) for a, b in zip(res.frames[1:], res.pre_adapter[1:]))

    def test_workers_identical(self, models):
        frames = clip(7, 4)
        a = mux(vcm_encode(frames, EncodeConfig(27, 2, workers=1), models))
        b = mux(vcm_encode(frames, EncodeConfig(27, 2, workers=4), models))
        assert a == b
        assert digest(vcm_decode(a, models, 1)) == digest(vcm_decode(a, models, 4))

    def test_missing_ladder(self):
        with pytest.raises(ValueError):
            vcm_encode(clip(8, 2), EncodeConfig(32), Models())


class TestFallback:
    def test_target_55_has_no_lic(self, models):
        bs = vcm_encode(clip(9, 4), EncodeConfig(55, 2), models)
        assert bs.flags & FLAG_FALLBACK
        assert ROLE_INTRA_LIC not in [f.role for f in bs.frames]
        assert [f.role for f in bs.frames] == [ROLE_INTRA_CVC, ROLE_INTER_CVC] * 2
        assert all(f.model_id == NO_MODEL for f in bs.frames)
        out = vcm_decode(mux(bs), models)
        assert len(out) == 4

    def test_forced(self, models):
        bs = vcm_encode(clip(10, 2), EncodeConfig(22, 8, force_fallback=True), models)
        assert bs.fallback and bs.frames[0].qp == 17

    def test_fallback_needs_no_models(self):
        bs = vcm_encode(clip(11, 2), EncodeConfig(60, 8, use_ima=False), Models())
        assert len(vcm_decode(mux(bs), Models())) == 2


class TestContainer:
    def test_rate(self, models):
        bs = vcm_encode(clip(12, 2), EncodeConfig(40, 8), models)
        assert bits_per_pixel(bs) == pytest.approx(8 * len(mux(bs)) / (2 * 56 * 40))

    def test_empty(self, models):
        bs = vcm_encode([], EncodeConfig(32), models)
        assert vcm_decode(mux(bs), models) == []

    def test_single_byte_corruptions(self, models):
        data = mux(vcm_encode(clip(13, 3), EncodeConfig(37, 2), models))
        rng = np.random.default_rng(0)
        for _ in range(300):
            buf = bytearray(data)
            pos = int(rng.integers(len(buf)))
            buf[pos] ^= int(rng.integers(1, 256))
            with pytest.raises(BitstreamError):
                demux(bytes(buf))

    def test_truncation(self, models):
        data = mux(vcm_encode(clip(14, 2), EncodeConfig(37, 2), models))
        for cut in (0, 5, len(data) // 2, len(data) - 1):
            with pytest.raises(BitstreamError):
                demux(data[:cut])

    def test_role_inconsistency(self, models):
        bs = vcm_encode(clip(15, 2), EncodeConfig(37, 2), models)
        bs.frames[1].role = ROLE_INTRA_LIC
        with pytest.raises(BitstreamError):
            demux(mux(bs))
