"""Learned intra codec."""
from .codec import IntraPayload, ModelMismatchError, decode_latent, lic_decode, lic_encode
from .ladder import NOMINAL_QPS, LadderError, QualityLadder, select_model, select_qp
from .model import LicConfig, LicModel, to_float_pixels, to_uint8
from .pmf import frequency_tables


def probmodel_frequencies(groups_decoded, group_idx, model, shape_hw=None, workers=1):
    """Per-element frequency tables for ``group_idx`` given the decoded prefix."""
    if shape_hw is None:
        shape_hw = groups_decoded.shape[1:]
    return model.frequencies(groups_decoded, group_idx, shape_hw, workers)


__all__ = [
    "IntraPayload", "LadderError", "LicConfig", "LicModel", "ModelMismatchError", "NOMINAL_QPS",
    "QualityLadder", "decode_latent", "frequency_tables", "lic_decode", "lic_encode",
    "probmodel_frequencies", "select_model", "select_qp", "to_float_pixels", "to_uint8",
]
