"""Post-filters around the codecs: IHA, IMA and F-IMA.

All three share a small convolutional autoencoder (two stride-2 convs, two
transposed-conv upsamplers, skips between matching resolutions) whose last
layer is zero-initialized and added to the input, so an untrained adapter is
the identity. IHA and F-IMA additionally condition on the coding QP and the
frame size through injection blocks placed before every resampling layer.
"""
import os
from dataclasses import dataclass

import numpy as np

from .nn import autograd as ag
from .nn import checkpoint
from .nn.functional import ConfigurationError
from .nn.network import LayerSpec, Network, NetworkSpec, init_params
from .nn.quant import QTensor, QuantizedNetwork, quantize_network, quantize_tensor, round_shift

KINDS = ("iha", "ima", "fima")
INJECTED = {"iha": True, "ima": False, "fima": True}
C_INJ = 8
RES_NORM = 4096.0
PIXEL_EXP = -8
ACT_EXP = -12
SIDE_EXP = -12
MULTIPLE = 4


@dataclass(frozen=True)
class SideInfo:
    qp: int
    width: int
    height: int

    def __post_init__(self):
        if not 0 <= self.qp <= 63:
            raise ConfigurationError(f"qp {self.qp} outside [0, 63]")
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError("frame size must be positive")

    def normalized(self):
        v = np.array([self.qp / 63.0, self.width / RES_NORM, self.height / RES_NORM])
        return np.clip(v, 0.0, 1.0)


def side_matrix(sides):
    return np.stack([s.normalized() for s in sides])


def adapter_spec(kind, base=32, c_inj=C_INJ):
    if kind not in KINDS:
        raise ConfigurationError(f"unknown adapter kind {kind!r}")
    inj = INJECTED[kind]
    layers = []

    def block(layer):
        # an injection generator precedes every resampling layer
        if inj and layer.stride > 1:
            layers.append(LayerSpec("linear", 3, c_inj, activation="prelu"))
            layer = LayerSpec(layer.kind, layer.in_ch + c_inj, layer.out_ch, layer.kernel, layer.stride,
                              layer.padding, layer.activation, layer.skip, True, layer.output_padding)
        layers.append(layer)
        return len(layers)  # index of the activation this layer writes

    a_full = block(LayerSpec("conv", 3, base, 3, 1, 1, "relu"))
    a_half = block(LayerSpec("conv", base, base, 3, 2, 1, "relu"))
    block(LayerSpec("conv", base, base, 3, 2, 1, "relu"))
    block(LayerSpec("conv", base, base, 3, 1, 1, "relu"))
    block(LayerSpec("tconv", base, base, 3, 2, 1, "relu", skip=a_half, output_padding=1))
    block(LayerSpec("tconv", base, base, 3, 2, 1, "relu", skip=a_full, output_padding=1))
    layers.append(LayerSpec("conv", base, 3, 3, 1, 1, "none", skip=0))
    return NetworkSpec(layers, kind)


def injection_code(side, layer_params):
    """linear(3 -> C_inj) of the normalized side vector followed by PReLU."""
    z = ag.linear(ag.as_var(np.atleast_2d(side)), layer_params["w"], layer_params["b"])
    return ag.prelu(z, layer_params["slope"])


def build_injection(side, feature_dims, layer_params):
    """Injection tensor (N, C_inj, H, W): the code repeated over space."""
    v = side.normalized() if isinstance(side, SideInfo) else np.asarray(side, dtype=np.float64)
    params = {k: ag.as_var(np.asarray(getattr(p, "value", p))) for k, p in layer_params.items()}
    code = injection_code(v, params)
    _, h, w = feature_dims
    return ag.tile_spatial(code, h, w).value


def _f32(params):
    return {i: {k: np.asarray(v, dtype=np.float32).astype(np.float64) for k, v in p.items()}
            for i, p in params.items()}


class AdapterModel:
    """One adapter; float params for training, optional integer executor."""

    def __init__(self, kind, params=None, rng=None, base=32):
        self.kind = kind
        self.spec = adapter_spec(kind, base)
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = init_params(self.spec, rng, zero_last=True)
        self.net = Network(self.spec, params)
        self._quantized = None

    @property
    def injected(self):
        return INJECTED[self.kind]

    def parameters(self):
        return self.net.parameters()

    def numpy_params(self):
        return self.net.numpy_params()

    def copy(self):
        return AdapterModel(self.kind, self.numpy_params())

    def invalidate(self):
        self._quantized = None

    def forward_train(self, x, side=None):
        """Float path on ``uint8 / 256`` pixels; ``side`` is (N, 3) normalized."""
        if self.injected and side is None:
            raise ConfigurationError(f"{self.kind} needs QP/resolution side information")
        out = self.net(ag.as_var(x), None if side is None else ag.as_var(side))
        return ag.clip(out, 0.0, 1.0)

    def quantized(self):
        if self._quantized is None:
            layers = quantize_network(self.spec, _f32(self.numpy_params()), in_exp=PIXEL_EXP,
                                      act_exp=ACT_EXP, side_exp=SIDE_EXP)
            self._quantized = QuantizedNetwork(layers, SIDE_EXP)
        return self._quantized

    def apply(self, frame, side=None, quantized=None, workers=1):
        """Filter uint8 (3, H, W) or (N, 3, H, W) frames; returns the same shape.

        ``quantized`` defaults to True for IHA (it sits in the decode loop)
        and False for IMA / F-IMA.
        """
        if self.injected and side is None:
            raise ConfigurationError(f"{self.kind} needs QP/resolution side information")
        frames = np.asarray(frame)
        single = frames.ndim == 3
        if single:
            frames = frames[None]
        if frames.dtype != np.uint8:
            raise ConfigurationError("adapters take uint8 frames")
        n, _, h, w = frames.shape
        ph, pw = -h % MULTIPLE, -w % MULTIPLE
        x = np.pad(frames, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge") if ph or pw else frames
        sv = None
        if self.injected:
            sides = side if isinstance(side, (list, tuple)) else [side] * n
            sv = side_matrix(sides)
        use_q = (self.kind == "iha") if quantized is None else quantized
        if use_q:
            sq = None if sv is None else QTensor(quantize_tensor(sv, SIDE_EXP), SIDE_EXP)
            out = self.quantized()(QTensor(x.astype(np.int64), PIXEL_EXP), sq, workers)
            pix = np.clip(round_shift(out.data, PIXEL_EXP - out.exp), 0, 255).astype(np.uint8)
        else:
            out = self.net(ag.Var(x / 256.0), None if sv is None else ag.Var(sv))
            pix = np.clip(np.floor(out.value * 256.0 + 0.5), 0, 255).astype(np.uint8)
        pix = pix[:, :, :h, :w]
        return pix[0] if single else pix

    def save(self, path):
        checkpoint.save(path, self.spec, params=_f32(self.numpy_params()))
        if self.kind == "iha":
            checkpoint.save(_qpath(path), self.spec, quantized=self.quantized().layers)

    @classmethod
    def load(cls, path):
        spec, params, _ = checkpoint.load(path)
        if spec.kind not in KINDS:
            raise ConfigurationError(f"{path} holds a {spec.kind} network, not an adapter")
        base = spec.layers[0].out_ch
        model = cls(spec.kind, params, base=base)
        if os.path.exists(_qpath(path)):
            _, _, q = checkpoint.load(_qpath(path))
            model._quantized = QuantizedNetwork(q, SIDE_EXP)
        return model


def _qpath(path):
    root, ext = os.path.splitext(path)
    return root + ".q" + ext


def apply_adapter(frame, model, side=None, workers=1):
    return model.apply(frame, side, workers=workers)
