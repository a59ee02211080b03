"""End-to-end desk-scale training of one complete system, cached on disk.

Order: LIC ladder, then IHA on ladder reconstructions, then IMA on hybrid
decodes that use the trained IHA, then F-IMA on block-codec-only decodes.
"""
import json
import os
import time
from dataclasses import dataclass

from ..adapters import AdapterModel
from ..lic import QualityLadder
from ..pipeline import Models
from .adapter_trainer import AdapterTrainConfig, fima_data, iha_data, ima_data, train_adapter
from .config import config_hash, write_config
from .data import SyntheticDatasetSpec, generate_images, generate_synthetic
from .lic_trainer import LicTrainConfig, train_lic

HELD_OUT_SEED = 900000


@dataclass(frozen=True)
class SystemConfig:
    seed: int = 0
    lic_epochs: int = 320
    lic_checkpoints: tuple = (68, 80, 170, 220, 270, 320)
    lic_patches: int = 256
    lic_lr: float = 1e-3
    iha_epochs: int = 30
    ima_epochs: int = 30
    fima_epochs: int = 30
    adapter_patches: int = 256
    iha_images: int = 12
    train_sequences: int = 4
    width: int = 96
    height: int = 64
    frames: int = 9
    intra_period: int = 8

    def lic(self):
        return LicTrainConfig(seed=self.seed, epochs=self.lic_epochs, checkpoints=self.lic_checkpoints,
                              patches_per_epoch=self.lic_patches, lr=self.lic_lr)

    def adapter(self, kind):
        epochs = {"iha": self.iha_epochs, "ima": self.ima_epochs, "fima": self.fima_epochs}[kind]
        return AdapterTrainConfig(kind=kind, seed=self.seed, epochs=epochs, patches_per_epoch=self.adapter_patches)

    def sequence_spec(self, seed):
        return SyntheticDatasetSpec(width=self.width, height=self.height, frames=self.frames, seed=seed)


def training_sequences(cfg):
    return [generate_synthetic(cfg.sequence_spec(cfg.seed * 1000 + 500 + i)).frames
            for i in range(cfg.train_sequences)]


def held_out_sequences(cfg, count=5):
    """Evaluation sequences; disjoint seeds from every training draw."""
    return [generate_synthetic(cfg.sequence_spec(HELD_OUT_SEED + i)) for i in range(count)]


def default_cache():
    return os.environ.get("NNVVC_CACHE", os.path.join(os.path.expanduser("~"), ".cache", "nnvvc"))


def system_dir(cfg, cache=None):
    return os.path.join(cache or default_cache(), f"system-{config_hash(cfg)}")


def _stage(path, log):
    done = os.path.exists(path)
    if done:
        log(f"cached: {path}")
    return done


def load_models(root):
    """Models from a directory holding ``ladder/qpNN`` and ``{iha,ima,fima}.nnvw``; absent parts are None."""
    if not os.path.isdir(root):
        raise FileNotFoundError(f"models directory {root} does not exist")
    lad_dir = os.path.join(root, "ladder")
    ladder = QualityLadder.load(lad_dir) if os.path.isdir(lad_dir) else None
    ad = {}
    for kind in ("iha", "ima", "fima"):
        path = os.path.join(root, f"{kind}.nnvw")
        ad[kind] = AdapterModel.load(path) if os.path.exists(path) else None
    return Models(ladder, ad["iha"], ad["ima"], ad["fima"])


def build_system(cfg=None, cache=None, log=print, workers=1):
    """Train (or load from cache) the ladder and the three adapters."""
    cfg = cfg or SystemConfig()
    root = system_dir(cfg, cache)
    os.makedirs(root, exist_ok=True)
    write_config(os.path.join(root, "system.cfg"), cfg)
    times = {}
    lad_dir = os.path.join(root, "ladder")
    if not _stage(os.path.join(lad_dir, "done"), log):
        t0 = time.perf_counter()
        ladder, _ = train_lic(cfg.lic(), log_path=os.path.join(root, "lic_log.csv"))
        ladder.save(lad_dir)
        open(os.path.join(lad_dir, "done"), "w").close()
        times["lic"] = time.perf_counter() - t0
        log(f"LIC ladder trained in {times['lic']:.0f} s: "
            + ", ".join(f"QP{m.nominal_qp} {m.bpp:.3f} bpp" for m in ladder))
    ladder = QualityLadder.load(lad_dir)
    sequences = training_sequences(cfg)
    adapters = {}
    for kind in ("iha", "ima", "fima"):
        path = os.path.join(root, f"{kind}.nnvw")
        if not _stage(path, log):
            t0 = time.perf_counter()
            if kind == "iha":
                images = generate_images(cfg.iha_images, (cfg.height, cfg.width), seed=cfg.seed * 2 + 7)
                data = iha_data(ladder, images, workers)
            elif kind == "ima":
                data = ima_data(Models(ladder, adapters["iha"], None, None), sequences,
                                intra_period=cfg.intra_period, workers=workers)
            else:
                data = fima_data(sequences, intra_period=cfg.intra_period, workers=workers)
            model, _ = train_adapter(data, cfg.adapter(kind), log_path=os.path.join(root, f"{kind}_log.csv"))
            model.save(path)
            times[kind] = time.perf_counter() - t0
            log(f"{kind.upper()} trained on {len(data)} frames in {times[kind]:.0f} s")
        adapters[kind] = AdapterModel.load(path)
    if times:
        tpath = os.path.join(root, "timings.json")
        old = json.load(open(tpath)) if os.path.exists(tpath) else {}
        old.update(times)
        with open(tpath, "w") as f:
            json.dump(old, f, indent=1)
    return Models(ladder, adapters["iha"], adapters["ima"], adapters["fima"])
