"""Deterministic fixed-point inference.

Values are integers with a power-of-two exponent: ``real = data * 2**exp``.
Requantization is an arithmetic shift with round-half-away-from-zero.

Multiply-accumulates run on float64 BLAS only when a bound check proves every
partial sum is an integer below 2**53. In that regime float addition is exact,
so the result does not depend on summation order, thread count or platform.
Otherwise the slow int64 path is used, and anything past 2**62 is refused.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from .functional import ConfigurationError

EXACT_FLOAT_LIMIT = 2 ** 53
INT64_LIMIT = 2 ** 62
INT32_LIMIT = 2 ** 31


class QuantizationOverflowError(ArithmeticError):
    """An accumulator or activation left its integer range."""


@dataclass
class QTensor:
    data: np.ndarray
    exp: int

    def to_float(self):
        return self.data.astype(np.float64) * 2.0 ** self.exp


@dataclass
class QuantizedLayer:
    kind: str
    in_ch: int
    out_ch: int
    kernel: int
    stride: int
    padding: int
    weight: np.ndarray
    bias: np.ndarray
    in_exp: int
    w_exp: int
    out_exp: int
    activation: str = "none"
    slope: np.ndarray = None
    slope_exp: int = 0
    skip: int = -1
    injection: bool = False
    output_padding: int = 0
    report: dict = field(default_factory=dict)


def round_shift(values, shift):
    """Divide int64 ``values`` by ``2**shift`` rounding half away from zero.

    Negative ``shift`` multiplies (exact, overflow-checked).
    """
    v = np.asarray(values, dtype=np.int64)
    if shift <= 0:
        if v.size and int(np.max(np.abs(v))) >= INT64_LIMIT >> (-shift):
            raise QuantizationOverflowError("left shift overflows int64")
        return v << (-shift)
    half = np.int64(1) << np.int64(shift - 1)
    mag = (np.abs(v) + half) >> np.int64(shift)
    return np.where(v < 0, -mag, mag)


def quantize_tensor(values, exp):
    """Round ``values / 2**exp`` half away from zero to int64."""
    scaled = np.asarray(values, dtype=np.float64) * 2.0 ** (-exp)
    q = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    if q.size and np.max(np.abs(q)) >= INT64_LIMIT:
        raise QuantizationOverflowError("value does not fit in int64 at this exponent")
    return q.astype(np.int64)


def choose_exponent(values, bits):
    """Smallest exponent so that max |value| maps below ``2**(bits-1)``; 0 for all-zero."""
    m = float(np.max(np.abs(values))) if np.size(values) else 0.0
    if m == 0.0:
        return 0
    return int(np.frexp(m)[1]) - (bits - 1)


def rescale(q, to_exp):
    if q.exp == to_exp:
        return q
    return QTensor(round_shift(q.data, to_exp - q.exp), to_exp)


def _check_int32(data, where):
    if data.size and int(np.max(np.abs(data))) >= INT32_LIMIT:
        raise QuantizationOverflowError(f"{where}: activation exceeds int32 range")


def _mac_bound(x_abs_max, weight, bias, axis):
    wsum = np.abs(weight).sum(axis=axis)
    return int(x_abs_max) * int(np.max(wsum)) + int(np.max(np.abs(bias))) if wsum.size else 0


def _split_rows(n, workers):
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).astype(int)
    return [(edges[i], edges[i + 1]) for i in range(workers) if edges[i + 1] > edges[i]]


def _matmul(a, b, exact_float, workers):
    """Row-chunked integer matmul; chunks are independent so results are identical for any worker count."""
    if exact_float:
        a = a.astype(np.float64)
        b = b.astype(np.float64)
    else:
        a = a.astype(np.int64)
        b = b.astype(np.int64)
    chunks = _split_rows(a.shape[0], workers)
    if len(chunks) <= 1:
        out = a @ b
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda r: a[r[0]:r[1]] @ b, chunks))
        out = np.concatenate(parts, axis=0)
    return out.astype(np.int64) if exact_float else out


def _accumulate(x, layer, workers):
    xa = int(np.max(np.abs(x.data))) if x.data.size else 0
    w = layer.weight
    if layer.kind == "conv":
        bound = _mac_bound(xa, w.reshape(w.shape[0], -1), layer.bias, axis=1)
    elif layer.kind == "tconv":
        # each output pixel sums at most in_ch * k * k products
        bound = xa * int(np.abs(w).sum(axis=(0, 2, 3)).max()) + int(np.max(np.abs(layer.bias)))
    else:
        bound = _mac_bound(xa, w, layer.bias, axis=1)
    if bound >= INT64_LIMIT:
        raise QuantizationOverflowError(f"{layer.kind} accumulator bound {bound} exceeds int64 range")
    exact = bound < EXACT_FLOAT_LIMIT
    xd = x.data
    if layer.kind == "conv":
        n = xd.shape[0]
        cols, ho, wo = F.im2col(xd.astype(np.float64 if exact else np.int64), layer.kernel,
                                layer.stride, layer.padding)
        acc = _matmul(cols, w.reshape(w.shape[0], -1).T, exact, workers)
        acc = acc + layer.bias
        return acc.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2)
    if layer.kind == "tconv":
        n, c, h, wd = xd.shape
        xmat = xd.transpose(0, 2, 3, 1).reshape(-1, c)
        cols = _matmul(xmat, w.reshape(c, -1), exact, workers)
        ho = F.tconv_out_size(h, layer.kernel, layer.stride, layer.padding, layer.output_padding)
        wo = F.tconv_out_size(wd, layer.kernel, layer.stride, layer.padding, layer.output_padding)
        acc = F.col2im(cols, (n, layer.out_ch, ho, wo), layer.kernel, layer.stride, layer.padding, (h, wd))
        return acc + layer.bias[None, :, None, None]
    return _matmul(xd, w.T, exact, workers) + layer.bias


def apply_activation(acc, layer):
    if layer.activation == "relu":
        return np.maximum(acc, 0)
    if layer.activation == "prelu":
        shp = (1, -1) + (1,) * (acc.ndim - 2)
        neg = round_shift(acc * layer.slope.reshape(shp), -layer.slope_exp)
        return np.where(acc < 0, neg, acc)
    return acc


def conv2d_quantized(x, layer, workers=1):
    """Integer conv / transposed conv / linear with requantization and activation."""
    if x.exp != layer.in_exp:
        raise ConfigurationError(f"input exponent {x.exp} != layer input exponent {layer.in_exp}")
    expected = x.data.shape[1]
    if expected != layer.in_ch:
        raise ConfigurationError(f"layer expects {layer.in_ch} channels, got {expected}")
    acc = _accumulate(x, layer, workers)
    out = round_shift(acc, layer.out_exp - (layer.in_exp + layer.w_exp))
    out = apply_activation(out, layer)
    _check_int32(out, f"{layer.kind} layer")
    return QTensor(out, layer.out_exp)


def quantize_layer(spec_layer, params, in_exp, out_exp, weight_bits=16):
    w = np.asarray(params["w"], dtype=np.float64)
    b = np.asarray(params["b"], dtype=np.float64)
    w_exp = choose_exponent(w, weight_bits)
    if not np.any(w) and np.any(b):
        # bias-only layer: keep the bias at the output precision
        w_exp = out_exp - in_exp
    wq = quantize_tensor(w, w_exp)
    bq = quantize_tensor(b, in_exp + w_exp)
    slope, slope_exp = None, 0
    if spec_layer.activation == "prelu":
        slope_exp = min(choose_exponent(params["slope"], weight_bits), -1)
        slope = quantize_tensor(params["slope"], slope_exp)
    report = {
        "w_exp": w_exp,
        "max_weight_error": float(np.max(np.abs(wq * 2.0 ** w_exp - w))) if w.size else 0.0,
        "max_bias_error": float(np.max(np.abs(bq * 2.0 ** (in_exp + w_exp) - b))) if b.size else 0.0,
    }
    return QuantizedLayer(
        kind=spec_layer.kind, in_ch=spec_layer.in_ch, out_ch=spec_layer.out_ch,
        kernel=spec_layer.kernel, stride=spec_layer.stride, padding=spec_layer.padding,
        weight=wq, bias=bq, in_exp=in_exp, w_exp=w_exp, out_exp=out_exp,
        activation=spec_layer.activation, slope=slope, slope_exp=slope_exp,
        skip=spec_layer.skip, injection=spec_layer.injection,
        output_padding=spec_layer.output_padding, report=report)


def quantize_network(spec, params, in_exp=-8, act_exp=-12, side_exp=-12, weight_bits=16):
    """Float network -> list of :class:`QuantizedLayer`.

    The first compute layer takes ``in_exp``; every other activation, and the
    injection codes, live at ``act_exp``. Injection generators read the side
    vector at ``side_exp``.
    """
    layers = []
    cur = in_exp
    for i, layer in enumerate(spec.layers):
        if layer.kind == "linear":
            layers.append(quantize_layer(layer, params[i], side_exp, act_exp, weight_bits))
            continue
        layers.append(quantize_layer(layer, params[i], cur, act_exp, weight_bits))
        cur = act_exp
    return layers


def calibration_report(layers):
    """Per-layer quantization errors as ``key=value`` lines."""
    lines = []
    for i, q in enumerate(layers):
        lines.append(f"layer{i}.kind={q.kind}")
        lines.append(f"layer{i}.exponents={q.in_exp},{q.w_exp},{q.out_exp}")
        lines.append(f"layer{i}.max_weight_error={q.report.get('max_weight_error', 0.0):.6e}")
        lines.append(f"layer{i}.max_bias_error={q.report.get('max_bias_error', 0.0):.6e}")
    return "\n".join(lines) + "\n"


class QuantizedNetwork:
    """Integer executor mirroring :class:`nnvvc.nn.network.Network`."""

    def __init__(self, layers, side_exp=-12):
        self.layers = layers
        self.side_exp = side_exp

    @property
    def out_exp(self):
        compute = [q for q in self.layers if q.kind != "linear"]
        return compute[-1].out_exp if compute else 0

    def __call__(self, x, side=None, workers=1):
        return self.forward(x, side, workers)

    def forward(self, x, side=None, workers=1):
        if not isinstance(x, QTensor):
            raise TypeError("quantized network input must be a QTensor")
        acts = [x]
        inj = None
        for i, q in enumerate(self.layers):
            h = acts[-1]
            if q.kind == "linear":
                if side is None:
                    raise ConfigurationError("network has injection blocks but no side information was given")
                sq = side if isinstance(side, QTensor) else QTensor(quantize_tensor(side, self.side_exp), self.side_exp)
                inj = conv2d_quantized(rescale(sq, q.in_exp), q, workers)
                acts.append(h)
                continue
            if q.injection:
                code = rescale(inj, h.exp).data
                n, _, hh, ww = h.data.shape
                tiled = np.broadcast_to(code[:, :, None, None], code.shape + (hh, ww))
                h = QTensor(np.concatenate([h.data, tiled], axis=1), h.exp)
            y = conv2d_quantized(h, q, workers)
            if q.skip >= 0:
                sk = rescale(acts[q.skip], y.exp)
                y = QTensor(y.data + sk.data, y.exp)
                _check_int32(y.data, f"skip add at layer {i}")
            acts.append(y)
        return acts[-1]
