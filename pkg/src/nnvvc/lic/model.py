"""Learned image codec: analysis/synthesis transforms and a channel-group prior.

The latent has ``latent_ch`` channels split into ``groups`` equal groups.
Group 0 is coded with per-channel learned constants; group ``k`` is coded
with logistic parameters predicted from groups ``0..k-1`` by a small context
network. Pixels are held as ``uint8 / 256`` on the float path so the integer
input exponent is exact.
"""
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..nn import autograd as ag
from ..nn import checkpoint
from ..nn.functional import ConfigurationError
from ..nn.network import LayerSpec, Network, NetworkSpec, init_params
from ..nn.quant import QTensor, QuantizedNetwork, quantize_network, round_shift
from . import pmf

PIXEL_EXP = -8
ACT_EXP = -12
DOWNSAMPLE = 16
# He init leaves most latents inside the rounding dead zone; start them spread out
LATENT_GAIN = 8.0


@dataclass(frozen=True)
class LicConfig:
    latent_ch: int = 32
    groups: int = 4
    channels: tuple = (32, 64, 96)
    kernel: int = 3
    context_hidden: int = 32
    context_kernel: int = 3

    def __post_init__(self):
        if self.latent_ch % self.groups:
            raise ConfigurationError("latent channels must be divisible by the group count")
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    @property
    def group_ch(self):
        return self.latent_ch // self.groups

    def to_meta(self):
        d = asdict(self)
        d["channels"] = ",".join(str(c) for c in self.channels)
        return d

    @classmethod
    def from_meta(cls, meta):
        kw = {}
        for f in fields(cls):
            if f.name not in meta:
                continue
            v = meta[f.name]
            kw[f.name] = tuple(int(c) for c in v.split(",")) if f.name == "channels" else int(v)
        return cls(**kw)


def encoder_spec(cfg):
    k, p = cfg.kernel, cfg.kernel // 2
    c = (3,) + cfg.channels + (cfg.latent_ch,)
    layers = [LayerSpec("conv", c[i], c[i + 1], k, 2, p, "relu" if i < 3 else "none") for i in range(4)]
    return NetworkSpec(layers, "lic-encoder")


def decoder_spec(cfg):
    k, p = cfg.kernel, cfg.kernel // 2
    c = (cfg.latent_ch,) + cfg.channels[::-1] + (3,)
    layers = [LayerSpec("tconv", c[i], c[i + 1], k, 2, p, "relu" if i < 3 else "none", output_padding=1)
              for i in range(4)]
    return NetworkSpec(layers, "lic-decoder")


def prior_spec(cfg):
    # a 1x1 conv over a constant one-pixel input: its output is the learned constant
    return NetworkSpec([LayerSpec("conv", 1, 2 * cfg.group_ch, 1)], "lic-prior")


def context_spec(cfg, k):
    kk = cfg.context_kernel
    return NetworkSpec([
        LayerSpec("conv", k * cfg.group_ch, cfg.context_hidden, kk, 1, kk // 2, "relu"),
        LayerSpec("conv", cfg.context_hidden, 2 * cfg.group_ch, 1),
    ], "lic-context")


def to_float_pixels(img):
    return np.asarray(img, dtype=np.float64) / 256.0


def to_uint8(x):
    return np.clip(np.floor(np.asarray(x) * 256.0 + 0.5), 0, 255).astype(np.uint8)


def _f32(params):
    return {i: {k: np.asarray(v, dtype=np.float32).astype(np.float64) for k, v in p.items()}
            for i, p in params.items()}


class LicModel:
    """Float (trainable) and integer (coding) forms of one quality point."""

    def __init__(self, cfg=None, params=None, nominal_qp=None, bpp=None, rng=None):
        self.cfg = cfg or LicConfig()
        self.specs = {"encoder": encoder_spec(self.cfg), "decoder": decoder_spec(self.cfg),
                      "prior": prior_spec(self.cfg)}
        for k in range(1, self.cfg.groups):
            self.specs[f"context{k}"] = context_spec(self.cfg, k)
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = {}
            for name, spec in self.specs.items():
                params[name] = init_params(spec, rng)
            # start the context/prior heads at mu = 0, log-scale = 0
            for name in self.specs:
                if name == "prior" or name.startswith("context"):
                    last = len(self.specs[name].layers) - 1
                    params[name][last]["w"] *= 0.1 if name != "prior" else 0.0
            last = len(self.specs["encoder"].layers) - 1
            params["encoder"][last]["w"] *= LATENT_GAIN
            params["encoder"][last]["b"] *= LATENT_GAIN
            params["decoder"][0]["w"] /= LATENT_GAIN
        self.nets = {name: Network(spec, params[name]) for name, spec in self.specs.items()}
        self.nominal_qp = nominal_qp
        self.bpp = bpp
        self._quantized = None

    # ----------------------------------------------------------------- float path
    def parameters(self):
        return [v for name in sorted(self.nets) for v in self.nets[name].parameters()]

    def numpy_params(self):
        return {name: net.numpy_params() for name, net in self.nets.items()}

    def copy(self):
        return LicModel(self.cfg, self.numpy_params(), self.nominal_qp, self.bpp)

    def _prior_params(self, n, h, w):
        c = self.cfg.group_ch
        out = self.nets["prior"](ag.Var(np.ones((1, 1, 1, 1))))
        mu = _tile(ag_slice(out, 0, c), n, h, w)
        ls = _tile(ag_slice(out, c, 2 * c), n, h, w)
        return mu, ls

    def forward_train(self, x):
        """Float path with straight-through rounding.

        Returns ``(x_hat, bits, y_hat)``: ``bits`` is the per-latent-element
        code length (a Var shaped like ``y_hat``).
        """
        x = ag.as_var(x)
        y = self.nets["encoder"](x)
        y_hat = ag.ste_round(ag.clip(y, pmf.SYM_LO, pmf.SYM_HI))
        x_hat = ag.clip(self.nets["decoder"](y_hat), 0.0, 1.0)
        return x_hat, self.latent_bits(y_hat), y_hat

    def latent_bits(self, y_hat):
        """Per-element code length of a rounded latent under the float prior."""
        y_hat = ag.as_var(y_hat)
        n, _, h, w = y_hat.shape
        c = self.cfg.group_ch
        bits = []
        for k in range(self.cfg.groups):
            g = ag_slice(y_hat, k * c, (k + 1) * c)
            if k == 0:
                mu, ls = self._prior_params(n, h, w)
            else:
                out = self.nets[f"context{k}"](ag_slice(y_hat, 0, k * c))
                mu, ls = ag_slice(out, 0, c), ag_slice(out, c, 2 * c)
            bits.append(ag.logistic_bits(g, mu, ls, pmf.SYM_LO, pmf.SYM_HI, pmf.LOG_SCALE_RANGE))
        return ag.concat(bits)

    # --------------------------------------------------------------- integer path
    def quantized(self):
        if self._quantized is None:
            q = {}
            for name, net in self.nets.items():
                params = _f32(net.numpy_params())
                in_exp = PIXEL_EXP if name == "encoder" else 0
                q[name] = QuantizedNetwork(quantize_network(net.spec, params, in_exp=in_exp, act_exp=ACT_EXP))
            self._quantized = q
        return self._quantized

    def invalidate(self):
        self._quantized = None

    def analysis(self, img_u8, workers=1):
        """uint8 (3, H, W) -> clamped integer latent (C, H/16, W/16) and clamp flag."""
        x = QTensor(np.asarray(img_u8, dtype=np.int64)[None], PIXEL_EXP)
        y = self.quantized()["encoder"](x, workers=workers)
        y_hat = round_shift(y.data, -y.exp)[0]
        clamped = bool(np.any((y_hat < pmf.SYM_LO) | (y_hat > pmf.SYM_HI)))
        return np.clip(y_hat, pmf.SYM_LO, pmf.SYM_HI), clamped

    def synthesis(self, y_hat, workers=1):
        out = self.quantized()["decoder"](QTensor(np.asarray(y_hat, dtype=np.int64)[None], 0), workers=workers)
        pix = round_shift(out.data[0], PIXEL_EXP - out.exp)
        return np.clip(pix, 0, 255).astype(np.uint8)

    def group_params(self, prefix, group_idx, shape_hw, workers=1):
        """Integer (mu, log-scale) at exponent -12 for every element of ``group_idx``."""
        c = self.cfg.group_ch
        h, w = shape_hw
        q = self.quantized()
        if group_idx == 0:
            out = q["prior"](QTensor(np.ones((1, 1, 1, 1), dtype=np.int64), 0), workers=workers).data[0, :, 0, 0]
            mu = np.broadcast_to(out[:c, None, None], (c, h, w))
            ls = np.broadcast_to(out[c:, None, None], (c, h, w))
            return mu, ls
        prefix = np.asarray(prefix, dtype=np.int64)
        if prefix.shape[0] != group_idx * c:
            raise ConfigurationError(f"group {group_idx} needs {group_idx * c} context channels, got {prefix.shape[0]}")
        out = q[f"context{group_idx}"](QTensor(prefix[None], 0), workers=workers).data[0]
        return out[:c], out[c:]

    def frequencies(self, prefix, group_idx, shape_hw, workers=1):
        mu, ls = self.group_params(prefix, group_idx, shape_hw, workers)
        return pmf.frequency_tables(mu, ls)

    # ---------------------------------------------------------------- persistence
    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        q = self.quantized()
        for name, net in self.nets.items():
            checkpoint.save(os.path.join(directory, f"{name}.nnvw"), net.spec, params=_f32(net.numpy_params()))
            checkpoint.save(os.path.join(directory, f"{name}.q.nnvw"), net.spec, quantized=q[name].layers)
        meta = self.cfg.to_meta()
        meta["nominal_qp"] = "" if self.nominal_qp is None else self.nominal_qp
        meta["bpp"] = "" if self.bpp is None else repr(float(self.bpp))
        write_meta(os.path.join(directory, "meta.txt"), meta)

    @classmethod
    def load(cls, directory):
        meta = read_meta(os.path.join(directory, "meta.txt"))
        cfg = LicConfig.from_meta(meta)
        params, quant = {}, {}
        names = ["encoder", "decoder", "prior"] + [f"context{k}" for k in range(1, cfg.groups)]
        for name in names:
            _, p, _ = checkpoint.load(os.path.join(directory, f"{name}.nnvw"))
            params[name] = p
            qpath = os.path.join(directory, f"{name}.q.nnvw")
            if os.path.exists(qpath):
                _, _, ql = checkpoint.load(qpath)
                quant[name] = QuantizedNetwork(ql)
        model = cls(cfg, params,
                    int(meta["nominal_qp"]) if meta.get("nominal_qp") else None,
                    float(meta["bpp"]) if meta.get("bpp") else None)
        if len(quant) == len(names):
            model._quantized = quant
        return model


def ag_slice(x, start, stop):
    """Channel slice of an NCHW Var (axis 1)."""
    def grad_fn(g):
        full = np.zeros_like(x.value)
        full[:, start:stop] = g
        return (full,)
    return ag._node(x.value[:, start:stop], (x,), grad_fn)


def _tile(v, n, h, w):
    """(1, C, 1, 1) Var -> (n, C, h, w)."""
    def grad_fn(g):
        return (g.sum(axis=(0, 2, 3), keepdims=True),)
    return ag._node(np.broadcast_to(v.value, (n, v.shape[1], h, w)).copy(), (v,), grad_fn)


def write_meta(path, meta):
    with open(path, "w") as f:
        for k in sorted(meta):
            f.write(f"{k}={meta[k]}\n")


def read_meta(path):
    meta = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                k, _, v = line.partition("=")
                meta[k.strip()] = v.strip()
    return meta
