"""Tensor kernels, autodiff, fixed-point inference and utilities."""
from .autograd import GraphError, Var, backward
from .functional import ConfigurationError, conv2d_naive
from .macs import count_macs
from .network import LayerSpec, Network, NetworkSpec, init_params
from .optim import Adam, AdamState, adam_step
from .quant import (QTensor, QuantizationOverflowError, QuantizedLayer, QuantizedNetwork,
                    calibration_report, conv2d_quantized, quantize_network, quantize_tensor,
                    round_shift)
from .resample import resample_bicubic

__all__ = [
    "Adam", "AdamState", "ConfigurationError", "GraphError", "LayerSpec", "Network", "NetworkSpec",
    "QTensor", "QuantizationOverflowError", "QuantizedLayer", "QuantizedNetwork", "Var",
    "adam_step", "backward", "calibration_report", "conv2d_naive", "conv2d_quantized",
    "count_macs", "init_params", "quantize_network", "quantize_tensor", "resample_bicubic",
    "round_shift",
]
