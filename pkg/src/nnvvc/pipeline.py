"""Hybrid encode/decode: learned intra frames, block-codec inter frames.

Encode: intra positions go through the LIC, the reconstruction is enhanced
by the IHA and injected into the block codec as its reference; the other
frames are inter-coded against those references. Decode: the intra frames
are LIC-decoded and IHA-filtered, re-encoded losslessly and spliced into a
plain block-codec stream that an unmodified decoder reads; IMA then adapts
the inter frames. In fallback mode the block codec codes everything and
F-IMA adapts every frame.

Container (little-endian): ``"VCM1"``, version u8, width u16, height u16,
frame count u16, intra period u16, target qp u8, flags u8 (bit 0 fallback,
bit 1 resampled, bit 2 IHA, bit 3 IMA), coded width/height u16 x2 when
resampled, then per frame ``role u8, qp u8, model-id u8, length u32,
payload``, then a CRC32 of everything before it.
"""
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .adapters import SideInfo
from .cvc import CvcConfig, CvcStream, FrameRecord, cvc_decode, cvc_encode, is_intra_position, splice_lossless
from .cvc.codec import INJECTED
from .cvc.transform import check_qp
from .entropy import CorruptStreamError
from .lic import lic_decode, lic_encode
from .nn.resample import resample_bicubic

MAGIC = b"VCM1"
VERSION = 1
ROLE_INTRA_LIC, ROLE_INTER_CVC, ROLE_INTRA_CVC = 0, 1, 2
ROLES = {ROLE_INTRA_LIC: "intra-LIC", ROLE_INTER_CVC: "inter-CVC", ROLE_INTRA_CVC: "intra-CVC-fallback"}
NO_MODEL = 255
FLAG_FALLBACK, FLAG_RESAMPLED, FLAG_IHA, FLAG_IMA = 1, 2, 4, 8
INTRA_QP_OFFSET = 5
FALLBACK_THRESHOLD = 49

_HEAD = struct.Struct("<4sBHHHHBB")
_SIZE = struct.Struct("<HH")
_REC = struct.Struct("<BBBI")
_CRC = struct.Struct("<I")


class BitstreamError(CorruptStreamError):
    """Malformed or corrupted container."""


# ----------------------------------------------------------- rate control
def derive_qps(target_qp_inter):
    """(QP_intra, QP_inter) with the intra offset, clamped to [0, 63]."""
    t = check_qp(target_qp_inter)
    return min(max(t - INTRA_QP_OFFSET, 0), 63), t


def decide_fallback(qp_intra, threshold=FALLBACK_THRESHOLD):
    return qp_intra > threshold


def round_even(num, den=1):
    """Nearest even integer to ``num / den`` (halves round up), exact for integers."""
    return 2 * ((num + den) // (2 * den))


def resample_decision(width, height, limit=(1920, 1080)):
    """(resampled?, (coded_w, coded_h)); inputs larger than ``limit`` shrink by 3/4."""
    if width <= 0 or height <= 0:
        raise ValueError("frame size must be positive")
    if width > limit[0] or height > limit[1]:
        return True, (round_even(3 * width, 4), round_even(3 * height, 4))
    return False, (width, height)


@dataclass
class EncodeConfig:
    target_qp: int = 32
    intra_period: int = 32
    fallback_threshold_qp: int = FALLBACK_THRESHOLD
    resample_limit: tuple = (1920, 1080)
    use_iha: bool = True
    use_ima: bool = True
    force_fallback: bool = False
    workers: int = 1

    def __post_init__(self):
        check_qp(self.target_qp)
        if not 1 <= self.intra_period <= 0xFFFF:
            raise ValueError("intra period must be in 1..65535")


@dataclass
class Models:
    ladder: object = None
    iha: object = None
    ima: object = None
    fima: object = None


# --------------------------------------------------------------- container
@dataclass
class FramePart:
    role: int
    qp: int
    model_id: int
    payload: bytes


@dataclass
class VcmBitstream:
    width: int
    height: int
    intra_period: int
    target_qp: int
    flags: int = 0
    coded_size: tuple = None
    frames: list = field(default_factory=list)
    version: int = VERSION

    @property
    def fallback(self):
        return bool(self.flags & FLAG_FALLBACK)

    @property
    def resampled(self):
        return bool(self.flags & FLAG_RESAMPLED)

    @property
    def size(self):
        return self.coded_size if self.resampled else (self.width, self.height)

    def to_bytes(self):
        return mux(self)

    @classmethod
    def from_bytes(cls, data):
        return demux(data)

    @property
    def nbytes(self):
        return len(mux(self))


def mux(bs):
    out = bytearray(_HEAD.pack(MAGIC, bs.version, bs.width, bs.height, len(bs.frames), bs.intra_period,
                               bs.target_qp, bs.flags))
    if bs.resampled:
        out += _SIZE.pack(*bs.coded_size)
    for f in bs.frames:
        out += _REC.pack(f.role, f.qp, f.model_id, len(f.payload))
        out += f.payload
    out += _CRC.pack(zlib.crc32(out) & 0xFFFFFFFF)
    return bytes(out)


def demux(data):
    """Parse and validate a container; every failure is a :class:`BitstreamError`."""
    data = bytes(data)
    if len(data) < _HEAD.size + _CRC.size:
        raise BitstreamError("truncated container")
    body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    magic, version, w, h, n, period, qp, flags = _HEAD.unpack_from(body, 0)
    if magic != MAGIC:
        raise BitstreamError("bad magic")
    if version != VERSION:
        raise BitstreamError(f"unsupported version {version}")
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise BitstreamError("container checksum mismatch")
    if flags & ~0x0F or qp > 63 or period == 0 or (n and (w == 0 or h == 0)):
        raise BitstreamError("invalid sequence header")
    off = _HEAD.size
    coded = None
    if flags & FLAG_RESAMPLED:
        if len(body) - off < _SIZE.size:
            raise BitstreamError("truncated coded size")
        coded = _SIZE.unpack_from(body, off)
        off += _SIZE.size
    frames = []
    for i in range(n):
        if len(body) - off < _REC.size:
            raise BitstreamError(f"truncated record header for frame {i}")
        role, fqp, mid, length = _REC.unpack_from(body, off)
        off += _REC.size
        if role not in ROLES or fqp > 63:
            raise BitstreamError(f"invalid record header for frame {i}")
        if len(body) - off < length:
            raise BitstreamError(f"truncated payload for frame {i}")
        frames.append(FramePart(role, fqp, mid, body[off:off + length]))
        off += length
    if off != len(body):
        raise BitstreamError("trailing bytes before checksum")
    bs = VcmBitstream(w, h, period, qp, flags, coded, frames, version)
    _check_roles(bs)
    return bs


def _check_roles(bs):
    for i, f in enumerate(bs.frames):
        intra = is_intra_position(i, bs.intra_period)
        if bs.fallback:
            ok = f.role == (ROLE_INTRA_CVC if intra else ROLE_INTER_CVC) and f.model_id == NO_MODEL
        else:
            ok = f.role == (ROLE_INTRA_LIC if intra else ROLE_INTER_CVC)
            ok = ok and (f.model_id != NO_MODEL) == intra
        if not ok:
            raise BitstreamError(f"frame {i}: role {ROLES.get(f.role)} inconsistent with the intra period")


# ------------------------------------------------------------------ encode
def _prepare(video, config):
    frames = [np.asarray(f) for f in video]
    if not frames:
        return frames, (0, 0), False, (0, 0)
    shape = frames[0].shape
    if len(shape) != 3 or shape[0] != 3 or any(f.shape != shape or f.dtype != np.uint8 for f in frames):
        raise ValueError("video must be a list of equally sized uint8 (3, H, W) frames")
    h, w = shape[1:]
    if w > 0xFFFF or h > 0xFFFF:
        raise ValueError("frame size exceeds 65535")
    flag, (cw, ch) = resample_decision(w, h, config.resample_limit)
    if flag:
        frames = [resample_bicubic(f, (ch, cw)) for f in frames]
    return frames, (w, h), flag, (cw, ch)


def vcm_encode(video, config, models):
    """Encode a list of uint8 (3, H, W) frames into a :class:`VcmBitstream`."""
    frames, (w, h), resampled, (cw, chh) = _prepare(video, config)
    qp_intra, qp_inter = derive_qps(config.target_qp)
    fallback = config.force_fallback or decide_fallback(qp_intra, config.fallback_threshold_qp)
    flags = (FLAG_FALLBACK if fallback else 0) | (FLAG_RESAMPLED if resampled else 0)
    flags |= (FLAG_IHA if config.use_iha and not fallback else 0) | (FLAG_IMA if config.use_ima else 0)
    bs = VcmBitstream(w, h, config.intra_period, config.target_qp, flags, (cw, chh) if resampled else None)
    if not frames:
        return bs
    cvc_cfg = CvcConfig(qp=qp_inter, intra_period=config.intra_period, intra_qp=qp_intra)
    if fallback:
        stream = cvc_encode(frames, None, cvc_cfg)
        for i, rec in enumerate(stream.frames):
            role = ROLE_INTRA_CVC if is_intra_position(i, config.intra_period) else ROLE_INTER_CVC
            bs.frames.append(FramePart(role, rec.qp, NO_MODEL, rec.to_bytes()))
        return bs
    if models.ladder is None:
        raise ValueError("LIC ladder required outside fallback mode")
    model = models.ladder.select(qp_intra)
    injected, intra_payloads = {}, {}
    for i in range(0, len(frames), config.intra_period):
        payload, y_hat = lic_encode(frames[i], model, config.workers)
        rec = model.synthesis(y_hat, config.workers)[:, :chh, :cw]
        injected[i] = _iha(rec, model, models, flags, config.workers)
        intra_payloads[i] = payload.to_bytes()
    stream = cvc_encode(frames, injected, cvc_cfg)
    for i, rec in enumerate(stream.frames):
        if i in intra_payloads:
            bs.frames.append(FramePart(ROLE_INTRA_LIC, qp_intra, int(model.nominal_qp), intra_payloads[i]))
        else:
            bs.frames.append(FramePart(ROLE_INTER_CVC, rec.qp, NO_MODEL, rec.to_bytes()))
    return bs


def _iha(rec, model, models, flags, workers):
    if not flags & FLAG_IHA:
        return rec
    if models.iha is None:
        raise ValueError("stream requires an IHA model")
    _, h, w = rec.shape
    return models.iha.apply(rec, SideInfo(int(model.nominal_qp), w, h), workers=workers)


# ------------------------------------------------------------------ decode
@dataclass
class DecodeResult:
    frames: list
    pre_adapter: list
    intra_lic: dict
    references: dict


def _cvc_stream(bs, records):
    cw, chh = bs.size
    qp_intra, qp_inter = derive_qps(bs.target_qp)
    cfg = CvcConfig(qp=qp_inter, intra_period=bs.intra_period, intra_qp=qp_intra)
    return CvcStream(cfg, cw, chh, records)


def _parse_cvc_record(payload, i):
    rec, off = FrameRecord.from_bytes(payload, 0)
    if off != len(payload):
        raise BitstreamError(f"frame {i}: trailing bytes in block-codec record")
    if rec.ftype == INJECTED:
        raise BitstreamError(f"frame {i}: placeholder records are not allowed in the container")
    return rec


def vcm_decode_full(data, models, workers=1, path="reencode"):
    """Decode to a :class:`DecodeResult` (machine output plus intermediates).

    ``path`` is ``"reencode"`` (lossless re-encode of the IHA outputs into a
    plain stream) or ``"inject"`` (references handed straight to the decoder).
    """
    bs = data if isinstance(data, VcmBitstream) else demux(data)
    n = len(bs.frames)
    if n == 0:
        return DecodeResult([], [], {}, {})
    cw, chh = bs.size
    if bs.fallback:
        records = [_parse_cvc_record(f.payload, i) for i, f in enumerate(bs.frames)]
        pre = cvc_decode(_cvc_stream(bs, records))
        out = list(pre)
        if bs.flags & FLAG_IMA:
            if models.fima is None:
                raise ValueError("stream requires an F-IMA model")
            out = [models.fima.apply(f, SideInfo(bs.frames[i].qp, cw, chh), workers=workers)
                   for i, f in enumerate(pre)]
        return DecodeResult(_restore(out, bs), pre, {}, {})
    if models.ladder is None:
        raise ValueError("stream requires LIC models")
    records, lic_rec, refs = [], {}, {}
    for i, f in enumerate(bs.frames):
        if f.role == ROLE_INTRA_LIC:
            model = models.ladder[f.model_id]
            rec = lic_decode(f.payload, model, workers)
            if rec.shape != (3, chh, cw):
                raise BitstreamError(f"frame {i}: intra payload size {rec.shape[1:]} != coded size")
            lic_rec[i] = rec
            refs[i] = _iha(rec, model, models, bs.flags, workers)
            records.append(FrameRecord(INJECTED, f.qp))
        else:
            records.append(_parse_cvc_record(f.payload, i))
    stream = _cvc_stream(bs, records)
    if path == "reencode":
        pre = cvc_decode(splice_lossless(stream, refs))
    elif path == "inject":
        pre = cvc_decode(stream, refs)
    else:
        raise ValueError(f"unknown decode path {path!r}")
    out = []
    for i, f in enumerate(pre):
        if i in lic_rec:
            out.append(lic_rec[i])
        elif bs.flags & FLAG_IMA:
            if models.ima is None:
                raise ValueError("stream requires an IMA model")
            out.append(models.ima.apply(f, workers=workers))
        else:
            out.append(f)
    return DecodeResult(_restore(out, bs), pre, lic_rec, refs)


def _restore(frames, bs):
    if not bs.resampled:
        return frames
    return [resample_bicubic(f, (bs.height, bs.width)) for f in frames]


def vcm_decode(data, models, workers=1, path="reencode"):
    """Machine-consumption video as a list of uint8 (3, H, W) frames."""
    return vcm_decode_full(data, models, workers, path).frames


def bits_per_pixel(bs):
    """Container bits per frame per (original) pixel."""
    n = len(bs.frames)
    if n == 0:
        return 0.0
    return 8.0 * bs.nbytes / (n * bs.width * bs.height)
