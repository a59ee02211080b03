"""Intra payload: LIC latent groups transported with rANS.

Layout (little-endian): model-id u8, padded-width u16, padded-height u16,
original-width u16, original-height u16, group byte u8 (low 7 bits: group
count, bit 7: latent clamp flag), then one entropy chunk per group.
"""
import struct
from dataclasses import dataclass

import numpy as np

from ..entropy import BitstreamChunk, CorruptStreamError, rans_decode, rans_encode
from ..nn.functional import ConfigurationError
from .model import DOWNSAMPLE

_HEAD = struct.Struct("<BHHHHB")


class ModelMismatchError(ValueError):
    """The payload was produced by a different quality model."""


@dataclass
class IntraPayload:
    model_id: int
    padded_size: tuple   # (w, h)
    original_size: tuple  # (w, h)
    chunks: list
    clamped: bool = False

    def to_bytes(self):
        groups = len(self.chunks)
        if groups > 127:
            raise ConfigurationError("at most 127 latent groups")
        head = _HEAD.pack(self.model_id, *self.padded_size, *self.original_size, groups | (0x80 if self.clamped else 0))
        return head + b"".join(c.to_bytes() for c in self.chunks)

    @classmethod
    def from_bytes(cls, data):
        if len(data) < _HEAD.size:
            raise CorruptStreamError("truncated intra header")
        mid, pw, ph, ow, oh, g = _HEAD.unpack_from(data, 0)
        if pw % DOWNSAMPLE or ph % DOWNSAMPLE or not (0 < ow <= pw < ow + DOWNSAMPLE) \
                or not (0 < oh <= ph < oh + DOWNSAMPLE):
            raise CorruptStreamError("inconsistent intra frame dimensions")
        off = _HEAD.size
        chunks = []
        for _ in range(g & 0x7F):
            c, off = BitstreamChunk.from_bytes(data, off)
            chunks.append(c)
        if off != len(data):
            raise CorruptStreamError("trailing bytes after intra chunks")
        return cls(mid, (pw, ph), (ow, oh), chunks, bool(g & 0x80))

    @property
    def bits(self):
        return 8 * len(self.to_bytes())


def pad_image(img, multiple=DOWNSAMPLE):
    """Edge-replicate (3, H, W) up to multiples of ``multiple``."""
    _, h, w = img.shape
    ph, pw = -h % multiple, -w % multiple
    if ph == 0 and pw == 0:
        return img
    return np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="edge")


def _model_id(model):
    return 255 if model.nominal_qp is None else int(model.nominal_qp)


def lic_encode(image, model, workers=1):
    """uint8 (3, H, W) -> :class:`IntraPayload`; also returns the latent."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ConfigurationError(f"expected a (3, H, W) image, got {img.shape}")
    if img.dtype != np.uint8:
        raise ConfigurationError("intra frames must be uint8")
    _, h, w = img.shape
    if h > 0xFFFF or w > 0xFFFF or h == 0 or w == 0:
        raise ConfigurationError("image size must be in 1..65535")
    padded = pad_image(img)
    y_hat, clamped = model.analysis(padded, workers)
    c = model.cfg.group_ch
    hw = y_hat.shape[1:]
    chunks = []
    for k in range(model.cfg.groups):
        tables = model.frequencies(y_hat[:k * c], k, hw, workers)
        chunks.append(rans_encode(y_hat[k * c:(k + 1) * c].reshape(-1), tables))
    payload = IntraPayload(_model_id(model), (padded.shape[2], padded.shape[1]), (w, h), chunks, clamped)
    return payload, y_hat


def decode_latent(payload, model, workers=1):
    if isinstance(payload, (bytes, bytearray)):
        payload = IntraPayload.from_bytes(payload)
    if payload.model_id != _model_id(model):
        raise ModelMismatchError(f"payload made with model {payload.model_id}, decoder has {_model_id(model)}")
    if len(payload.chunks) != model.cfg.groups:
        raise CorruptStreamError(f"{len(payload.chunks)} groups in payload, model has {model.cfg.groups}")
    pw, ph = payload.padded_size
    hw = (ph // DOWNSAMPLE, pw // DOWNSAMPLE)
    c = model.cfg.group_ch
    n = c * hw[0] * hw[1]
    y_hat = np.zeros((model.cfg.latent_ch,) + hw, dtype=np.int64)
    for k, chunk in enumerate(payload.chunks):
        if chunk.count != n:
            raise CorruptStreamError(f"group {k} declares {chunk.count} symbols, expected {n}")
        tables = model.frequencies(y_hat[:k * c], k, hw, workers)
        y_hat[k * c:(k + 1) * c] = rans_decode(chunk, tables, n).reshape((c,) + hw)
    return payload, y_hat


def lic_decode(payload, model, workers=1):
    """Payload (bytes or :class:`IntraPayload`) -> uint8 (3, H, W) reconstruction."""
    payload, y_hat = decode_latent(payload, model, workers)
    rec = model.synthesis(y_hat, workers)
    ow, oh = payload.original_size
    return rec[:, :oh, :ow]
