"""Small untrained-but-nontrivial models for fast pipeline tests."""
import numpy as np

from nnvvc.adapters import AdapterModel
from nnvvc.lic import LicConfig, LicModel, QualityLadder
from nnvvc.nn.network import init_params
from nnvvc.pipeline import Models

SMALL = LicConfig(latent_ch=8, groups=2, channels=(8, 8, 8))


def tiny_ladder(seed=0):
    models = []
    for i, qp in enumerate((22, 27, 32, 37, 42, 47)):
        m = LicModel(SMALL, rng=np.random.default_rng([seed, i]), nominal_qp=qp)
        # spread the latent so payloads are not trivially empty
        last = len(m.specs["encoder"].layers) - 1
        m.nets["encoder"].params[last]["w"].value *= 6.0 / (i + 1)
        m.bpp = 1.0 / (i + 1)
        m.invalidate()
        models.append(m)
    return QualityLadder(models)


def tiny_adapter(kind, seed=0):
    spec = AdapterModel(kind, base=8).spec
    params = init_params(spec, np.random.default_rng([seed, 99]))
    last = len(spec.layers) - 1
    params[last]["w"] *= 0.05
    return AdapterModel(kind, params, base=8)


def tiny_models(seed=0):
    return Models(tiny_ladder(seed), tiny_adapter("iha", seed), tiny_adapter("ima", seed),
                  tiny_adapter("fima", seed))


def clip(seed=0, frames=5, h=40, w=56):
    from nnvvc.training.data import SyntheticDatasetSpec, generate_synthetic

    return list(generate_synthetic(SyntheticDatasetSpec(width=w, height=h, frames=frames, seed=seed)).frames)
