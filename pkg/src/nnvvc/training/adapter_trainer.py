"""Adapter training data (per-kind recipes) and the training loop."""
import csv
from dataclasses import dataclass

import numpy as np

from ..adapters import KINDS, AdapterModel, SideInfo, side_matrix
from ..lic import lic_decode, lic_encode
from ..nn import autograd as ag
from ..nn.functional import ConfigurationError
from ..nn.optim import Adam
from ..pipeline import EncodeConfig, Models, vcm_decode_full, vcm_encode
from ..cvc import is_intra_position
from .losses import TRAIN_PROXY_SEED, extractor, total_loss_adapter

IMA_QPS = (22, 27, 32, 37, 42, 47, 52)
FIMA_QPS = (22, 27, 32, 37, 42, 47, 52, 57, 62)


@dataclass
class AdapterData:
    """Aligned (original, decoded) uint8 frames plus per-frame side info."""
    originals: np.ndarray
    decoded: np.ndarray
    sides: list

    def __len__(self):
        return len(self.originals)


def _stack(pairs):
    if not pairs:
        raise ConfigurationError("no training pairs were produced")
    o, d, s = zip(*pairs)
    return AdapterData(np.stack(o), np.stack(d), list(s))


def iha_data(ladder, images, workers=1):
    """Every image through every ladder model: (original, LIC reconstruction)."""
    pairs = []
    for model in ladder:
        for img in images:
            payload, _ = lic_encode(img, model, workers)
            rec = lic_decode(payload.to_bytes(), model, workers)
            pairs.append((img, rec, SideInfo(int(model.nominal_qp), img.shape[2], img.shape[1])))
    return _stack(pairs)


def ima_data(models, sequences, qps=IMA_QPS, intra_period=8, workers=1):
    """Hybrid coding with IMA off; inter frames before adaptation."""
    pairs = []
    for seq in sequences:
        for qp in qps:
            cfg = EncodeConfig(qp, intra_period, use_ima=False, workers=workers)
            res = vcm_decode_full(vcm_encode(list(seq), cfg, models), models, workers)
            for i, (orig, dec) in enumerate(zip(seq, res.pre_adapter)):
                if not is_intra_position(i, intra_period):
                    pairs.append((orig, dec, None))
    return _stack(pairs)


def fima_data(sequences, qps=FIMA_QPS, intra_period=8, workers=1):
    """Block-codec-only coding; every frame, side info = the frame's QP."""
    pairs = []
    none = Models(None, None, None, None)
    for seq in sequences:
        h, w = seq[0].shape[1:]
        for qp in qps:
            cfg = EncodeConfig(qp, intra_period, use_ima=False, force_fallback=True, workers=workers)
            bs = vcm_encode(list(seq), cfg, none)
            res = vcm_decode_full(bs, none, workers)
            for orig, dec, part in zip(seq, res.pre_adapter, bs.frames):
                pairs.append((orig, dec, SideInfo(part.qp, w, h)))
    return _stack(pairs)


@dataclass(frozen=True)
class AdapterTrainConfig:
    kind: str = "iha"
    seed: int = 0
    epochs: int = 40
    patches_per_epoch: int = 256
    batch: int = 8
    patch: int = 64
    lr: float = 2e-4
    base: int = 32
    proxy_seed: int = TRAIN_PROXY_SEED

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown adapter kind {self.kind!r}")


def _batch(rng, data, cfg):
    n, _, h, w = data.originals.shape
    p = min(cfg.patch, h, w) // 4 * 4
    idx = rng.integers(0, n, cfg.batch)
    ys = rng.integers(0, h - p + 1, cfg.batch)
    xs = rng.integers(0, w - p + 1, cfg.batch)
    orig = np.stack([data.originals[i, :, y:y + p, x:x + p] for i, y, x in zip(idx, ys, xs)])
    dec = np.stack([data.decoded[i, :, y:y + p, x:x + p] for i, y, x in zip(idx, ys, xs)])
    side = side_matrix([data.sides[i] for i in idx]) if data.sides[0] is not None else None
    return orig / 256.0, dec / 256.0, side


def train_adapter(data, config=None, log_path=None, progress=None):
    """Train one adapter on (original, decoded) pairs; returns ``(model, rows)``.

    Zero epochs return the zero-initialized model, which is the identity.
    """
    config = config or AdapterTrainConfig()
    model = AdapterModel(config.kind, rng=np.random.default_rng([config.seed, 10]), base=config.base)
    if model.injected and data.sides[0] is None:
        raise ConfigurationError(f"{config.kind} training data lacks side information")
    opt = Adam(model.parameters(), config.lr)
    ext = extractor(config.proxy_seed)
    steps = max(config.patches_per_epoch // config.batch, 1)
    rows = []
    log_file = open(log_path, "w", newline="") if log_path else None
    writer = csv.writer(log_file) if log_file else None
    if writer:
        writer.writerow(("epoch", "loss", "mse", "proxy"))
    try:
        for epoch in range(config.epochs):
            rng = np.random.default_rng([config.seed, 11, epoch])
            acc = np.zeros(3)
            for _ in range(steps):
                orig, dec, side = _batch(rng, data, config)
                opt.zero_grad()
                out = model.forward_train(dec, side)
                loss, parts = total_loss_adapter(orig, out, config.kind, ext)
                ag.backward(loss)
                opt.step()
                acc += (float(loss.value), parts["mse"], parts["proxy"])
            acc /= steps
            row = (epoch, *acc)
            rows.append(row)
            if writer:
                writer.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])
            if progress:
                progress(epoch, row)
    finally:
        if log_file:
            log_file.close()
    model.invalidate()
    return model, rows
