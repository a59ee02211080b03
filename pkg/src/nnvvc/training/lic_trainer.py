"""LWS training of one LIC network and collection of its quality ladder."""
import csv
import time
from dataclasses import dataclass

import numpy as np

from ..lic import LicConfig, LicModel, QualityLadder, lic_decode, lic_encode
from ..lic.ladder import NOMINAL_QPS, LadderError
from ..nn import autograd as ag
from ..nn.optim import Adam
from .data import generate_images, random_patches
from .losses import TRAIN_PROXY_SEED, extractor, total_loss_lic
from .lws import LwsSchedule

LOG_FIELDS = ("epoch", "w_rate", "w_mse", "w_task", "loss", "rate", "mse", "task", "seconds")


@dataclass(frozen=True)
class LicTrainConfig:
    seed: int = 0
    epochs: int = 320
    checkpoints: tuple = (68, 80, 170, 220, 270, 320)
    patches_per_epoch: int = 256
    batch: int = 8
    patch: int = 64
    lr: float = 1e-3
    pool_images: int = 64
    pool_size: tuple = (128, 128)
    val_images: int = 6
    latent_ch: int = 32
    channels: tuple = (32, 64, 96)
    groups: int = 4
    proxy_seed: int = TRAIN_PROXY_SEED

    def __post_init__(self):
        if len(self.checkpoints) != len(NOMINAL_QPS):
            raise ValueError(f"need {len(NOMINAL_QPS)} checkpoint epochs, got {len(self.checkpoints)}")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ValueError(f"checkpoint epochs must be strictly increasing, got {self.checkpoints}")
        if self.checkpoints and max(self.checkpoints) > self.epochs:
            raise ValueError("checkpoint epoch past the end of training")

    def lic_config(self):
        return LicConfig(latent_ch=self.latent_ch, groups=self.groups, channels=tuple(self.channels))


def _flip(rng, x):
    if rng.random() < 0.5:
        x = x[..., ::-1]
    return np.ascontiguousarray(x)


def measure_bpp(model, images):
    """Mean bits per pixel and PSNR of real integer coding over ``images``."""
    bits, px, sq = 0, 0, 0.0
    for img in images:
        payload, _ = lic_encode(img, model)
        data = payload.to_bytes()
        rec = lic_decode(data, model)
        bits += 8 * len(data)
        px += img.shape[1] * img.shape[2]
        sq += float(np.sum((rec.astype(np.float64) - img) ** 2))
    mse = sq / (3 * px)
    return bits / px, 10 * np.log10(255.0 ** 2 / max(mse, 1e-10))


def tag_ladder(candidates, qps=NOMINAL_QPS):
    """Assign nominal QPs by bpp rank (highest bpp -> lowest QP)."""
    order = sorted(candidates, key=lambda c: -c[1].bpp)
    models = {}
    for qp, (epoch, m) in zip(qps, order):
        m.nominal_qp = qp
        models[qp] = m
    ladder = QualityLadder(list(models.values()))
    try:
        ladder.check_monotone()
    except LadderError as e:
        detail = ", ".join(f"epoch {ep}: {m.bpp:.4f} bpp" for ep, m in candidates)
        raise LadderError(f"{e} ({detail})") from None
    return ladder


def train_lic(config=None, schedule=None, log_path=None, progress=None):
    """Run the schedule and return ``(ladder, log_rows)``.

    One epoch is ``patches_per_epoch`` random crops from a fixed synthetic
    pool. Checkpoint bpp is measured by actual coding of held-out images.
    """
    config = config or LicTrainConfig()
    schedule = schedule or LwsSchedule()
    rng = np.random.default_rng([config.seed, 1])
    pool = generate_images(config.pool_images, config.pool_size, seed=config.seed * 2 + 1)
    val = generate_images(config.val_images, config.pool_size, seed=config.seed * 2 + 2)
    model = LicModel(config.lic_config(), rng=np.random.default_rng([config.seed, 0]))
    params = model.parameters()
    opt = Adam(params, config.lr)
    ext = extractor(config.proxy_seed)
    rows, candidates = [], []
    steps = max(config.patches_per_epoch // config.batch, 1)
    log_file = open(log_path, "w", newline="") if log_path else None
    writer = csv.writer(log_file) if log_file else None
    if writer:
        writer.writerow(LOG_FIELDS)
    try:
        for epoch in range(config.epochs):
            t0 = time.perf_counter()
            ep_rng = np.random.default_rng([config.seed, 2, epoch])
            w_rate, w_mse, w_task = schedule.weights(epoch)
            acc = np.zeros(4)
            for _ in range(steps):
                x = random_patches(ep_rng, pool, config.batch, config.patch).astype(np.float64) / 256.0
                x = _flip(ep_rng, x)
                opt.zero_grad()
                x_hat, bits, y_hat = model.forward_train(x)
                loss, parts = total_loss_lic(x, x_hat, y_hat, epoch, schedule=schedule, ext=ext, bits=bits)
                ag.backward(loss)
                opt.step()
                acc += (float(loss.value), parts["rate"], parts["mse"], parts["task"])
            acc /= steps
            model.invalidate()
            row = (epoch, w_rate, w_mse, w_task, *acc, time.perf_counter() - t0)
            rows.append(row)
            if writer:
                writer.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])
                log_file.flush()
            if epoch + 1 in config.checkpoints:
                snap = model.copy()
                snap.bpp, snap.psnr = measure_bpp(snap, val)
                candidates.append((epoch + 1, snap))
            if progress:
                progress(epoch, row)
    finally:
        if log_file:
            log_file.close()
    if config.epochs == 0 or not candidates:
        return None, rows
    return tag_ladder(candidates), rows
