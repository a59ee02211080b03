"""Toy block-based video codec with reference injection and a lossless mode.

Frames are uint8 RGB (3, H, W), edge-padded to multiples of 16. Intra frames
use per-8x8 DC prediction from reconstructed neighbours, inter frames use
integer-pel full-search motion compensation on 16x16 macroblocks from the
previous reconstructed (or injected) frame. Residuals go through the integer
DCT and a scalar quantizer, or are sent exactly in lossless mode.

Motion vectors give content displacement: ``pred(y, x) = ref(y - dy, x - dx)``.

Stream layout (little-endian): config echo ``qp u8, intra-period u16,
lossless u8, width u16, height u16, frame-count u16``, then per frame
``type u8, qp u8`` and, for coded types, ``skip-freq u16, cbf-freq u16,
mvd-family u8, last-family u8, level-family u8`` and one entropy chunk.
"""
import struct
from dataclasses import dataclass, field

import numpy as np

from ..entropy import BitstreamChunk, CorruptStreamError, RansDecoder, RansEncoder
from . import syntax as sx
from .transform import INV_ZIGZAG, TB, ZIGZAG, check_qp, dequantize, fdct, idct, quantize

MB = 16
SEARCH = 8

INTRA, INTER, INJECTED, INTRA_LOSSLESS, SKIP_FRAME, INTER_LOSSLESS = range(6)
FRAME_TYPES = {INTRA: "intra", INTER: "inter", INJECTED: "injected", INTRA_LOSSLESS: "intra-lossless",
               SKIP_FRAME: "skip", INTER_LOSSLESS: "inter-lossless"}
_CODED = (INTRA, INTER, INTRA_LOSSLESS, INTER_LOSSLESS)

_SEQ = struct.Struct("<BHBHHH")
_FRAME = struct.Struct("<BB")
_PARAMS = struct.Struct("<HHBBB")


class MissingReferenceError(ValueError):
    pass


@dataclass(frozen=True)
class CvcConfig:
    qp: int = 32
    intra_period: int = 32
    lossless: bool = False
    intra_qp: int = None

    def __post_init__(self):
        check_qp(self.qp)
        if self.intra_qp is not None:
            check_qp(self.intra_qp)
        if not 1 <= self.intra_period <= 0xFFFF:
            raise ValueError("intra period must be in 1..65535")

    @property
    def qp_intra(self):
        return self.qp if self.intra_qp is None else self.intra_qp


@dataclass
class FrameRecord:
    ftype: int
    qp: int
    params: tuple = None
    chunk: BitstreamChunk = None

    def to_bytes(self):
        out = _FRAME.pack(self.ftype, self.qp)
        if self.ftype in _CODED:
            out += _PARAMS.pack(*self.params) + self.chunk.to_bytes()
        return out

    @classmethod
    def from_bytes(cls, buf, offset=0):
        if len(buf) - offset < _FRAME.size:
            raise CorruptStreamError("truncated frame record")
        ftype, qp = _FRAME.unpack_from(buf, offset)
        off = offset + _FRAME.size
        if ftype not in FRAME_TYPES:
            raise CorruptStreamError(f"unknown frame type {ftype}")
        if qp > 63:
            raise CorruptStreamError(f"frame qp {qp} out of range")
        if ftype not in _CODED:
            return cls(ftype, qp), off
        if len(buf) - off < _PARAMS.size:
            raise CorruptStreamError("truncated frame parameters")
        params = _PARAMS.unpack_from(buf, off)
        skip_f, cbf_f, *fam = params
        if not (0 < skip_f < sx.TOTAL and 0 < cbf_f < sx.TOTAL) or max(fam) >= len(sx.FAMILY):
            raise CorruptStreamError("invalid frame table parameters")
        chunk, off = BitstreamChunk.from_bytes(buf, off + _PARAMS.size)
        return cls(ftype, qp, params, chunk), off

    @property
    def nbytes(self):
        return len(self.to_bytes())


@dataclass
class CvcStream:
    config: CvcConfig
    width: int
    height: int
    frames: list = field(default_factory=list)

    def header_bytes(self):
        c = self.config
        return _SEQ.pack(c.qp, c.intra_period, int(c.lossless), self.width, self.height, len(self.frames))

    def to_bytes(self):
        return self.header_bytes() + b"".join(f.to_bytes() for f in self.frames)

    @classmethod
    def from_bytes(cls, data):
        if len(data) < _SEQ.size:
            raise CorruptStreamError("truncated sequence header")
        qp, period, lossless, w, h, n = _SEQ.unpack_from(data, 0)
        if lossless > 1 or qp > 63 or period == 0:
            raise CorruptStreamError("invalid sequence header")
        cfg = CvcConfig(qp=qp, intra_period=period, lossless=bool(lossless))
        off = _SEQ.size
        frames = []
        for _ in range(n):
            rec, off = FrameRecord.from_bytes(data, off)
            frames.append(rec)
        if off != len(data):
            raise CorruptStreamError("trailing bytes after last frame")
        return cls(cfg, w, h, frames)

    @property
    def nbytes(self):
        return len(self.to_bytes())


# ------------------------------------------------------------------ helpers
def pad_frame(frame, multiple=MB):
    _, h, w = frame.shape
    ph, pw = -h % multiple, -w % multiple
    if ph == 0 and pw == 0:
        return frame
    return np.pad(frame, ((0, 0), (0, ph), (0, pw)), mode="edge")


def _to_blocks(plane_stack, size):
    c, h, w = plane_stack.shape
    return plane_stack.reshape(c, h // size, size, w // size, size).transpose(0, 1, 3, 2, 4)


def _from_blocks(blocks):
    c, bh, bw, s, _ = blocks.shape
    return blocks.transpose(0, 1, 3, 2, 4).reshape(c, bh * s, bw * s)


def _candidates(search):
    cands = [(dx, dy) for dy in range(-search, search + 1) for dx in range(-search, search + 1)]
    # SAD ties: smallest |dx| + |dy| first, then raster order (dy, dx)
    cands.sort(key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]))
    return cands


def motion_search(cur, ref, search=SEARCH):
    """Full-search SAD per 16x16 block; returns (MBh, MBw, 2) int array of (dx, dy)."""
    c, h, w = cur.shape
    refp = np.pad(ref.astype(np.int32), ((0, 0), (search, search), (search, search)), mode="edge")
    cur32 = cur.astype(np.int32)
    cands = _candidates(search)
    sads = np.empty((len(cands), h // MB, w // MB), dtype=np.int64)
    for i, (dx, dy) in enumerate(cands):
        shifted = refp[:, search - dy:search - dy + h, search - dx:search - dx + w]
        d = np.abs(cur32 - shifted)
        sads[i] = d.reshape(c, h // MB, MB, w // MB, MB).sum(axis=(0, 2, 4))
    best = np.argmin(sads, axis=0)  # first minimum = tiebreak order
    cand = np.array(cands, dtype=np.int64)
    return cand[best]


def motion_compensate(ref, mvs, search=SEARCH):
    c, h, w = ref.shape
    refp = np.pad(ref.astype(np.int64), ((0, 0), (search, search), (search, search)), mode="edge")
    pred = np.empty((c, h, w), dtype=np.int64)
    for by in range(mvs.shape[0]):
        for bx in range(mvs.shape[1]):
            dx, dy = int(mvs[by, bx, 0]), int(mvs[by, bx, 1])
            if abs(dx) > search or abs(dy) > search:
                raise CorruptStreamError("motion vector outside the search range")
            y0, x0 = by * MB, bx * MB
            pred[:, y0:y0 + MB, x0:x0 + MB] = refp[:, search + y0 - dy:search + y0 - dy + MB,
                                                   search + x0 - dx:search + x0 - dx + MB]
    return pred


def med_predict(img):
    """LOCO-I median edge predictor over a full (3, H, W) plane stack."""
    x = img.astype(np.int64)
    a = np.zeros_like(x)
    b = np.zeros_like(x)
    cc = np.zeros_like(x)
    a[:, :, 1:] = x[:, :, :-1]
    b[:, 1:, :] = x[:, :-1, :]
    cc[:, 1:, 1:] = x[:, :-1, :-1]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    pred = np.where(cc >= hi, lo, np.where(cc <= lo, hi, a + b - cc))
    pred[:, 0, 1:] = x[:, 0, :-1]
    pred[:, 1:, 0] = x[:, :-1, 0]
    pred[:, 0, 0] = 128
    return pred


def _dc_pred(rec, ch, y0, x0):
    parts = []
    if y0 > 0:
        parts.append(rec[ch, y0 - 1, x0:x0 + TB])
    if x0 > 0:
        parts.append(rec[ch, y0:y0 + TB, x0 - 1])
    s = np.concatenate(parts, axis=-1).astype(np.int64)
    n = s.shape[-1]
    return (s.sum(axis=-1) + n // 2) // n


# ------------------------------------------------------------- symbol layer
def _block_symbols(levels_zz):
    """levels (..., 64) zigzag -> cbf flags and last positions."""
    nz = levels_zz != 0
    cbf = nz.any(axis=-1)
    last = np.where(cbf, 63 - np.argmax(nz[..., ::-1], axis=-1), 0)
    return cbf, last


def _put_block(enc, lv, last, t_last, t_level):
    enc.put(int(last), t_last)
    for v in lv[:last + 1].tolist():
        sx.put_signed(enc, v, t_level)


def _get_block(dec, t_last, t_level):
    last = dec.get(t_last)
    out = np.zeros(64, dtype=np.int64)
    for i in range(last + 1):
        out[i] = sx.get_signed(dec, t_level)
    return out


def _tables(params, search):
    skip_f, cbf_f, f_mvd, f_last, f_level = params
    return (sx.flag_table(skip_f), sx.flag_table(cbf_f), sx.bounded_signed_table(f_mvd, 2 * search),
            sx.unsigned_table(f_last, 64), sx.signed_table(f_level))


def _mv_preds(mvs):
    pred = np.zeros_like(mvs)
    pred[:, 1:] = mvs[:, :-1]
    return pred


# ------------------------------------------------------------- intra coding
def encode_intra(frame, qp):
    """DC-predicted DCT intra frame -> (FrameRecord, reconstruction)."""
    c, h, w = frame.shape
    cur = frame.astype(np.int64)
    rec = np.zeros((c, h, w), dtype=np.int64)
    nby, nbx = h // TB, w // TB
    levels = np.zeros((nby, nbx, c, 64), dtype=np.int64)
    chans = np.arange(c)
    for by in range(nby):
        for bx in range(nbx):
            y0, x0 = by * TB, bx * TB
            pred = _dc_pred(rec, chans, y0, x0).reshape(c, 1, 1) if (y0 or x0) else np.full((c, 1, 1), 128)
            res = cur[:, y0:y0 + TB, x0:x0 + TB] - pred
            lv = quantize(fdct(res), qp, offset_sixths=2)
            levels[by, bx] = lv.reshape(c, 64)[:, ZIGZAG]
            rr = idct(dequantize(lv, qp))
            rec[:, y0:y0 + TB, x0:x0 + TB] = np.clip(pred + rr, 0, 255)
    cbf, last = _block_symbols(levels)
    coded = levels[cbf]
    params = (sx.TOTAL // 2, sx.flag_freq(cbf), 0,
              sx.choose_family(last[cbf], "unsigned", size=64),
              sx.choose_family(np.concatenate([b[:l + 1] for b, l in zip(coded, last[cbf])]) if coded.size else []))
    _, t_cbf, _, t_last, t_level = _tables(params, SEARCH)
    enc = RansEncoder()
    for by in range(nby):
        for bx in range(nbx):
            for ch in range(c):
                f = bool(cbf[by, bx, ch])
                enc.put(int(f), t_cbf)
                if f:
                    _put_block(enc, levels[by, bx, ch], last[by, bx, ch], t_last, t_level)
    return FrameRecord(INTRA, qp, params, enc.finish()), rec.astype(np.uint8)


def decode_intra(rec_bytes, shape):
    c, h, w = shape
    _, t_cbf, _, t_last, t_level = _tables(rec_bytes.params, SEARCH)
    dec = RansDecoder(rec_bytes.chunk)
    qp = rec_bytes.qp
    rec = np.zeros((c, h, w), dtype=np.int64)
    chans = np.arange(c)
    for by in range(h // TB):
        for bx in range(w // TB):
            y0, x0 = by * TB, bx * TB
            lv = np.zeros((c, 64), dtype=np.int64)
            for ch in range(c):
                if dec.get(t_cbf):
                    lv[ch] = _get_block(dec, t_last, t_level)
            pred = _dc_pred(rec, chans, y0, x0).reshape(c, 1, 1) if (y0 or x0) else np.full((c, 1, 1), 128)
            coefs = lv[:, INV_ZIGZAG].reshape(c, TB, TB)
            rec[:, y0:y0 + TB, x0:x0 + TB] = np.clip(pred + idct(dequantize(coefs, qp)), 0, 255)
    dec.close()
    return rec.astype(np.uint8)


def encode_intra_lossless(frame):
    res = frame.astype(np.int64) - med_predict(frame)
    fam = sx.choose_family(res)
    params = (sx.TOTAL // 2, sx.TOTAL // 2, 0, 0, fam)
    t_level = sx.signed_table(fam)
    enc = RansEncoder()
    for v in res.reshape(-1).tolist():
        sx.put_signed(enc, v, t_level)
    return FrameRecord(INTRA_LOSSLESS, 0, params, enc.finish()), frame.copy()


def decode_intra_lossless(record, shape):
    c, h, w = shape
    t_level = sx.signed_table(record.params[4])
    dec = RansDecoder(record.chunk)
    res = np.array([sx.get_signed(dec, t_level) for _ in range(c * h * w)], dtype=np.int64).reshape(shape)
    dec.close()
    # invert the causal predictor pixel by pixel along rows, vectorized over channels
    out = np.zeros(shape, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            if y == 0 and x == 0:
                p = np.full(c, 128)
            elif y == 0:
                p = out[:, 0, x - 1]
            elif x == 0:
                p = out[:, y - 1, 0]
            else:
                a, b, cc = out[:, y, x - 1], out[:, y - 1, x], out[:, y - 1, x - 1]
                lo, hi = np.minimum(a, b), np.maximum(a, b)
                p = np.where(cc >= hi, lo, np.where(cc <= lo, hi, a + b - cc))
            out[:, y, x] = p + res[:, y, x]
    if out.min() < 0 or out.max() > 255:
        raise CorruptStreamError("lossless residual decodes outside the pixel range")
    return out.astype(np.uint8)


# ------------------------------------------------------------- inter coding
def encode_inter(frame, ref, qp, search=SEARCH, lossless=False):
    c, h, w = frame.shape
    cur = frame.astype(np.int64)
    mvs = motion_search(frame, ref, search)
    pred = motion_compensate(ref, mvs, search)
    res = cur - pred
    mvd = mvs - _mv_preds(mvs)
    nmy, nmx = h // MB, w // MB
    if lossless:
        mb_res = _to_blocks(res, MB).transpose(1, 2, 0, 3, 4).reshape(nmy, nmx, -1)
        skip = (np.abs(mvd).sum(axis=-1) == 0) & ~mb_res.any(axis=-1)
        recon = frame.copy()
        if skip.all():
            return FrameRecord(SKIP_FRAME, qp), recon
        params = (sx.flag_freq(skip), sx.TOTAL // 2,
                  sx.choose_family(mvd[~skip], "bounded", bound=2 * search), 0,
                  sx.choose_family(mb_res[~skip]))
        t_skip, _, t_mvd, _, t_level = _tables(params, search)
        enc = RansEncoder()
        for my in range(nmy):
            for mx in range(nmx):
                s = bool(skip[my, mx])
                enc.put(int(s), t_skip)
                if s:
                    continue
                enc.put(int(mvd[my, mx, 0]), t_mvd)
                enc.put(int(mvd[my, mx, 1]), t_mvd)
                for v in mb_res[my, mx].tolist():
                    sx.put_signed(enc, v, t_level)
        return FrameRecord(INTER_LOSSLESS, qp, params, enc.finish()), recon

    blocks = _to_blocks(res, TB)  # (c, h/8, w/8, 8, 8)
    lv = quantize(fdct(blocks), qp, offset_sixths=1)
    rec = np.clip(pred + _from_blocks(idct(dequantize(lv, qp))), 0, 255).astype(np.uint8)
    # per macroblock, per channel, 2x2 transform blocks in raster order
    zz = lv.reshape(c, h // TB, w // TB, 64)[..., ZIGZAG]
    zz = zz.reshape(c, nmy, 2, nmx, 2, 64).transpose(1, 3, 0, 2, 4, 5).reshape(nmy, nmx, c * 4, 64)
    cbf, last = _block_symbols(zz)
    skip = (np.abs(mvd).sum(axis=-1) == 0) & ~cbf.any(axis=-1)
    if skip.all():
        return FrameRecord(SKIP_FRAME, qp), rec
    live = ~skip
    coded = zz[live][cbf[live]]
    lasts = last[live][cbf[live]]
    params = (sx.flag_freq(skip), sx.flag_freq(cbf[live]),
              sx.choose_family(mvd[live], "bounded", bound=2 * search),
              sx.choose_family(lasts, "unsigned", size=64),
              sx.choose_family(np.concatenate([b[:l + 1] for b, l in zip(coded, lasts)]) if coded.size else []))
    t_skip, t_cbf, t_mvd, t_last, t_level = _tables(params, search)
    enc = RansEncoder()
    for my in range(nmy):
        for mx in range(nmx):
            s = bool(skip[my, mx])
            enc.put(int(s), t_skip)
            if s:
                continue
            enc.put(int(mvd[my, mx, 0]), t_mvd)
            enc.put(int(mvd[my, mx, 1]), t_mvd)
            for b in range(c * 4):
                f = bool(cbf[my, mx, b])
                enc.put(int(f), t_cbf)
                if f:
                    _put_block(enc, zz[my, mx, b], last[my, mx, b], t_last, t_level)
    return FrameRecord(INTER, qp, params, enc.finish()), rec


def decode_inter(record, ref, search=SEARCH):
    c, h, w = ref.shape
    nmy, nmx = h // MB, w // MB
    if record.ftype == SKIP_FRAME:
        return ref.copy()
    t_skip, t_cbf, t_mvd, t_last, t_level = _tables(record.params, search)
    dec = RansDecoder(record.chunk)
    mvs = np.zeros((nmy, nmx, 2), dtype=np.int64)
    lossless = record.ftype == INTER_LOSSLESS
    if lossless:
        res = np.zeros((nmy, nmx, c * MB * MB), dtype=np.int64)
    else:
        zz = np.zeros((nmy, nmx, c * 4, 64), dtype=np.int64)
    for my in range(nmy):
        for mx in range(nmx):
            pred_mv = mvs[my, mx - 1] if mx > 0 else np.zeros(2, dtype=np.int64)
            if dec.get(t_skip):
                mvs[my, mx] = pred_mv
                continue
            mvs[my, mx] = pred_mv + np.array([dec.get(t_mvd), dec.get(t_mvd)])
            if lossless:
                res[my, mx] = [sx.get_signed(dec, t_level) for _ in range(c * MB * MB)]
            else:
                for b in range(c * 4):
                    if dec.get(t_cbf):
                        zz[my, mx, b] = _get_block(dec, t_last, t_level)
    dec.close()
    pred = motion_compensate(ref, mvs, search)
    if lossless:
        r = res.reshape(nmy, nmx, c, MB, MB).transpose(2, 0, 1, 3, 4)
        out = pred + _from_blocks(r)
        if out.min() < 0 or out.max() > 255:
            raise CorruptStreamError("lossless residual decodes outside the pixel range")
        return out.astype(np.uint8)
    lv = zz.reshape(nmy, nmx, c, 2, 2, 64).transpose(2, 0, 3, 1, 4, 5).reshape(c, h // TB, w // TB, 64)
    lv = lv[..., INV_ZIGZAG].reshape(c, h // TB, w // TB, TB, TB)
    return np.clip(pred + _from_blocks(idct(dequantize(lv, record.qp))), 0, 255).astype(np.uint8)


# ------------------------------------------------------------ sequence level
def is_intra_position(index, intra_period):
    return index % intra_period == 0


def cvc_encode(frames, injected_refs=None, config=None, return_recon=False):
    """Encode a list of uint8 (3, H, W) frames.

    ``injected_refs`` maps frame index -> externally decoded frame; those
    positions become placeholders whose reconstruction is the injected frame.
    Remaining intra positions are coded by this codec.
    """
    config = config or CvcConfig()
    injected_refs = injected_refs or {}
    frames = [np.asarray(f) for f in frames]
    if frames:
        h, w = frames[0].shape[1:]
        if any(f.shape != frames[0].shape or f.dtype != np.uint8 for f in frames):
            raise ValueError("frames must share one (3, H, W) uint8 shape")
    else:
        h = w = 0
        if injected_refs:
            raise ValueError("injected references for an empty sequence")
    for i in injected_refs:
        if not 0 <= i < len(frames):
            raise MissingReferenceError(f"injected reference for nonexistent frame {i}")
    stream = CvcStream(config, w, h)
    recons = []
    prev = None
    for i, f in enumerate(frames):
        fp = pad_frame(f)
        if i in injected_refs:
            ref = np.asarray(injected_refs[i])
            if ref.shape != f.shape:
                raise ValueError(f"injected reference {i} has shape {ref.shape}, frame {f.shape}")
            rec_p = pad_frame(ref.astype(np.uint8))
            record = FrameRecord(INJECTED, config.qp_intra)
        elif is_intra_position(i, config.intra_period) or prev is None:
            if config.lossless:
                record, rec_p = encode_intra_lossless(fp)
            else:
                record, rec_p = encode_intra(fp, config.qp_intra)
        else:
            record, rec_p = encode_inter(fp, prev, config.qp, lossless=config.lossless)
        stream.frames.append(record)
        prev = rec_p
        recons.append(rec_p[:, :h, :w])
    return (stream, recons) if return_recon else stream


def cvc_decode(stream, injected_refs=None):
    """Decode a :class:`CvcStream` (or its bytes) into uint8 frames."""
    if isinstance(stream, (bytes, bytearray)):
        stream = CvcStream.from_bytes(bytes(stream))
    injected_refs = injected_refs or {}
    h, w = stream.height, stream.width
    shape = (3, h + (-h % MB), w + (-w % MB))
    out, prev = [], None
    for i, record in enumerate(stream.frames):
        t = record.ftype
        if t == INJECTED:
            if i not in injected_refs:
                raise MissingReferenceError(f"frame {i} needs an injected reference")
            rec_p = pad_frame(np.asarray(injected_refs[i]).astype(np.uint8))
        elif t == INTRA:
            rec_p = decode_intra(record, shape)
        elif t == INTRA_LOSSLESS:
            rec_p = decode_intra_lossless(record, shape)
        else:
            if prev is None:
                raise CorruptStreamError(f"frame {i} is predicted but has no reference")
            rec_p = decode_inter(record, prev)
        prev = rec_p
        out.append(rec_p[:, :h, :w])
    return out


def splice_lossless(stream, frames):
    """Replace injected placeholders with lossless intra records of ``frames``.

    This is the decoder-side re-encode path: the result is an ordinary
    stream that an unmodified decoder can read without injected references.
    """
    new = CvcStream(stream.config, stream.width, stream.height)
    for i, record in enumerate(stream.frames):
        if record.ftype == INJECTED:
            if i not in frames:
                raise MissingReferenceError(f"no frame to re-encode at placeholder {i}")
            rec, _ = encode_intra_lossless(pad_frame(np.asarray(frames[i]).astype(np.uint8)))
            new.frames.append(rec)
        else:
            new.frames.append(record)
    return new
