"""Losses, loss weighting, synthetic data and training loops."""
from .adapter_trainer import FIMA_QPS, IMA_QPS, AdapterData, AdapterTrainConfig, fima_data, iha_data, ima_data, train_adapter
from .config import config_hash, read_config, write_config
from .data import SyntheticDatasetSpec, SyntheticSequence, generate_images, generate_synthetic
from .lic_trainer import LicTrainConfig, measure_bpp, tag_ladder, train_lic
from .losses import (ADAPTER_PROXY_WEIGHTS, EVAL_PROXY_SEED, TRAIN_PROXY_SEED, ProxyExtractor, adapter_mse,
                     extractor, mse_loss, proxy_loss, rate_loss, total_loss_adapter, total_loss_lic)
from .lws import LwsSchedule, lws_weights, psi
from .system import SystemConfig, build_system, held_out_sequences, load_models, system_dir

__all__ = [
    "ADAPTER_PROXY_WEIGHTS", "AdapterData", "AdapterTrainConfig", "EVAL_PROXY_SEED", "FIMA_QPS", "IMA_QPS",
    "LicTrainConfig", "LwsSchedule", "ProxyExtractor", "SyntheticDatasetSpec", "SyntheticSequence",
    "SystemConfig", "TRAIN_PROXY_SEED", "adapter_mse", "build_system", "config_hash", "extractor",
    "fima_data", "generate_images", "generate_synthetic", "held_out_sequences", "iha_data", "ima_data",
    "load_models", "lws_weights", "measure_bpp", "mse_loss", "proxy_loss", "psi", "rate_loss", "read_config", "system_dir", "tag_ladder",
    "total_loss_adapter", "total_loss_lic", "train_adapter", "train_lic", "write_config",
]
