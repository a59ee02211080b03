"""Layer-list network description and its float (trainable) executor.

A network is an ordered list of :class:`LayerSpec`. Activations are indexed
``a[0]`` (network input) .. ``a[L]`` (output of the last layer). Layer ``i``
reads ``a[i]`` and writes ``a[i + 1]``; ``skip`` names an earlier activation
that is added to the layer output after its nonlinearity.

``linear`` layers are injection generators: they map the side-information
vector to a small code and pass ``a[i]`` through unchanged. The next layer
flagged ``injection`` concatenates that code, repeated over space, to its
input channels.
"""
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .functional import ConfigurationError, conv_out_size, tconv_out_size

KINDS = ("conv", "tconv", "linear")
ACTIVATIONS = ("none", "relu", "prelu")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_ch: int
    out_ch: int
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    activation: str = "none"
    skip: int = -1
    injection: bool = False
    output_padding: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.in_ch <= 0 or self.out_ch <= 0 or self.kernel <= 0 or self.stride <= 0:
            raise ConfigurationError(f"non-positive layer dimension in {self}")


@dataclass
class NetworkSpec:
    layers: list
    kind: str = "generic"
    side_dim: int = 3

    def shapes(self, in_ch, height, width):
        """Return the (C, H, W) of every activation; validates the chain."""
        acts = [(in_ch, height, width)]
        inj_ch = None
        for i, layer in enumerate(self.layers):
            c, h, w = acts[-1]
            if layer.kind == "linear":
                if layer.in_ch != self.side_dim:
                    raise ConfigurationError(f"layer {i}: injection input must be {self.side_dim}")
                inj_ch = layer.out_ch
                acts.append((c, h, w))
                continue
            expect = c + (inj_ch if layer.injection else 0)
            if layer.injection and inj_ch is None:
                raise ConfigurationError(f"layer {i}: injection flag without a preceding linear layer")
            if layer.in_ch != expect:
                raise ConfigurationError(f"layer {i}: expects {layer.in_ch} channels, chain gives {expect}")
            if layer.kind == "conv":
                h2 = conv_out_size(h, layer.kernel, layer.stride, layer.padding)
                w2 = conv_out_size(w, layer.kernel, layer.stride, layer.padding)
            else:
                h2 = tconv_out_size(h, layer.kernel, layer.stride, layer.padding, layer.output_padding)
                w2 = tconv_out_size(w, layer.kernel, layer.stride, layer.padding, layer.output_padding)
            if h2 <= 0 or w2 <= 0:
                raise ConfigurationError(f"layer {i}: empty output for input {h}x{w}")
            out = (layer.out_ch, h2, w2)
            if layer.skip >= 0:
                if layer.skip > i:
                    raise ConfigurationError(f"layer {i}: skip target {layer.skip} is not earlier")
                if acts[layer.skip] != out:
                    raise ConfigurationError(
                        f"layer {i}: skip from activation {layer.skip} has shape {acts[layer.skip]}, output {out}")
            acts.append(out)
        return acts

    def parameter_shapes(self):
        shapes = {}
        for i, layer in enumerate(self.layers):
            k = layer.kernel
            if layer.kind == "conv":
                shapes[i] = {"w": (layer.out_ch, layer.in_ch, k, k), "b": (layer.out_ch,)}
            elif layer.kind == "tconv":
                shapes[i] = {"w": (layer.in_ch, layer.out_ch, k, k), "b": (layer.out_ch,)}
            else:
                shapes[i] = {"w": (layer.out_ch, layer.in_ch), "b": (layer.out_ch,)}
            if layer.activation == "prelu":
                shapes[i]["slope"] = (layer.out_ch,)
        return shapes


def init_params(spec, rng, zero_last=False, prelu_slope=0.25):
    """He-normal weights, zero biases. ``zero_last`` zeroes the final layer."""
    params = {}
    for i, shp in spec.parameter_shapes().items():
        layer = spec.layers[i]
        if layer.kind == "tconv":
            fan_in = layer.in_ch * layer.kernel * layer.kernel / (layer.stride * layer.stride)
        elif layer.kind == "conv":
            fan_in = layer.in_ch * layer.kernel * layer.kernel
        else:
            fan_in = layer.in_ch
        gain = np.sqrt(2.0 / fan_in) if layer.activation != "none" else np.sqrt(1.0 / fan_in)
        p = {"w": rng.standard_normal(shp["w"]) * gain, "b": np.zeros(shp["b"])}
        if "slope" in shp:
            p["slope"] = np.full(shp["slope"], prelu_slope)
        params[i] = p
    if zero_last and spec.layers:
        last = len(spec.layers) - 1
        params[last] = {k: np.zeros_like(v) for k, v in params[last].items()}
    return params


class Network:
    """Float executor holding trainable :class:`Var` parameters."""

    def __init__(self, spec, params):
        self.spec = spec
        shapes = spec.parameter_shapes()
        self.params = {}
        for i, layer_shapes in shapes.items():
            self.params[i] = {}
            for name, shp in layer_shapes.items():
                value = np.asarray(params[i][name], dtype=np.float64)
                if value.shape != tuple(shp):
                    raise ConfigurationError(f"layer {i} {name}: shape {value.shape} != {shp}")
                self.params[i][name] = ag.Var(value.copy(), requires_grad=True, name=f"{i}.{name}")

    def parameters(self):
        return [v for i in sorted(self.params) for _, v in sorted(self.params[i].items())]

    def numpy_params(self):
        return {i: {k: v.value.copy() for k, v in p.items()} for i, p in self.params.items()}

    def zero_grad(self):
        for v in self.parameters():
            v.grad = None

    def __call__(self, x, side=None, keep=False):
        return self.forward(x, side, keep)

    def forward(self, x, side=None, keep=False):
        """Run the chain. ``side`` is an (N, side_dim) Var when injections are used.

        With ``keep`` the list of all activations is returned instead of the
        output (used by multi-layer feature losses).
        """
        x = ag.as_var(x)
        acts = [x]
        inj = None
        for i, layer in enumerate(self.spec.layers):
            p = self.params[i]
            h = acts[-1]
            if layer.kind == "linear":
                if side is None:
                    raise ConfigurationError("network has injection blocks but no side information was given")
                z = ag.linear(ag.as_var(side), p["w"], p["b"])
                inj = _activate(z, layer, p)
                acts.append(h)
                continue
            if layer.injection:
                h = ag.concat([h, ag.tile_spatial(inj, h.shape[2], h.shape[3])])
            if layer.kind == "conv":
                y = ag.conv2d(h, p["w"], p["b"], layer.stride, layer.padding)
            else:
                y = ag.conv_transpose2d(h, p["w"], p["b"], layer.stride, layer.padding, layer.output_padding)
            y = _activate(y, layer, p)
            if layer.skip >= 0:
                y = ag.add(y, acts[layer.skip])
            acts.append(y)
        return acts if keep else acts[-1]


def _activate(y, layer, p):
    if layer.activation == "relu":
        return ag.relu(y)
    if layer.activation == "prelu":
        return ag.prelu(y, p["slope"])
    return y

