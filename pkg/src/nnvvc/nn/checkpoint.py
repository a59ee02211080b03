"""NNVW binary checkpoint format (little-endian).

Header: magic ``NNVW``, version u8, network kind u8, layer count u16. Per
layer: kind u8, inC u16, outC u16, kernel u8, stride u8, padding u8,
activation u8, skip target i16 (-1 none), injection u8, dtype u8
(0 float32, 1 int32-quantized), then for quantized layers three i8 exponents
(input, weight, output). The payload follows: weights, bias, and for PReLU
the slopes. Quantized payloads store int32 weights, int64 bias (the bias
lives at the accumulator exponent and can exceed 32 bits) and, for PReLU, an
i8 slope exponent followed by int32 slopes.

Transposed convolutions always use ``output_padding = stride - 1``.
"""
import io
import struct

import numpy as np

from .network import LayerSpec, NetworkSpec
from .quant import QuantizedLayer

MAGIC = b"NNVW"
VERSION = 1
NETWORK_KINDS = ("generic", "lic-encoder", "lic-decoder", "lic-prior", "lic-context",
                 "iha", "ima", "fima", "proxy")
_LAYER_KINDS = ("conv", "tconv", "linear")
_ACTS = ("none", "relu", "prelu")
_LAYER = struct.Struct("<BHHBBBBhBB")


class CheckpointError(ValueError):
    pass


def _layer_header(layer, dtype):
    if layer.kind == "tconv" and layer.output_padding != layer.stride - 1:
        raise CheckpointError("transposed conv must use output_padding = stride - 1")
    return _LAYER.pack(_LAYER_KINDS.index(layer.kind), layer.in_ch, layer.out_ch, layer.kernel,
                       layer.stride, layer.padding, _ACTS.index(layer.activation), layer.skip,
                       int(layer.injection), dtype)


def _spec_from_header(fields):
    kind, in_ch, out_ch, k, s, p, act, skip, inj, dtype = fields
    try:
        name = _LAYER_KINDS[kind]
        activation = _ACTS[act]
    except IndexError as e:
        raise CheckpointError("unknown layer kind or activation code") from e
    spec = LayerSpec(name, in_ch, out_ch, k, s, p, activation, skip, bool(inj),
                     s - 1 if name == "tconv" else 0)
    return spec, dtype


def _read(buf, dtype, count):
    raw = buf.read(np.dtype(dtype).itemsize * count)
    if len(raw) != np.dtype(dtype).itemsize * count:
        raise CheckpointError("truncated payload")
    return np.frombuffer(raw, dtype=dtype).copy()


def dumps(spec, params=None, quantized=None):
    """Serialize a float network (``params``) or its quantized form."""
    if (params is None) == (quantized is None):
        raise ValueError("give exactly one of params / quantized")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<BBH", VERSION, NETWORK_KINDS.index(spec.kind), len(spec.layers)))
    shapes = spec.parameter_shapes()
    for i, layer in enumerate(spec.layers):
        if quantized is None:
            out.write(_layer_header(layer, 0))
            for name in ("w", "b", "slope"):
                if name in shapes[i]:
                    out.write(np.asarray(params[i][name], dtype="<f4").tobytes())
        else:
            q = quantized[i]
            out.write(_layer_header(layer, 1))
            out.write(struct.pack("<bbb", q.in_exp, q.w_exp, q.out_exp))
            if np.any(np.abs(q.weight) >= 2 ** 31):
                raise CheckpointError("quantized weight exceeds int32")
            out.write(np.asarray(q.weight, dtype="<i4").tobytes())
            out.write(np.asarray(q.bias, dtype="<i8").tobytes())
            if layer.activation == "prelu":
                out.write(struct.pack("<b", q.slope_exp))
                out.write(np.asarray(q.slope, dtype="<i4").tobytes())
    return out.getvalue()


def loads(data):
    """Inverse of :func:`dumps`: returns (spec, params or None, quantized or None)."""
    buf = io.BytesIO(data)
    if buf.read(4) != MAGIC:
        raise CheckpointError("bad magic")
    head = buf.read(4)
    if len(head) != 4:
        raise CheckpointError("truncated header")
    version, kind, count = struct.unpack("<BBH", head)
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    if kind >= len(NETWORK_KINDS):
        raise CheckpointError("unknown network kind")
    layers, params, quantized, dtypes = [], {}, [], set()
    for i in range(count):
        raw = buf.read(_LAYER.size)
        if len(raw) != _LAYER.size:
            raise CheckpointError("truncated layer header")
        layer, dtype = _spec_from_header(_LAYER.unpack(raw))
        layers.append(layer)
        dtypes.add(dtype)
        shp = NetworkSpec([layer]).parameter_shapes()[0]
        if dtype == 0:
            params[i] = {name: _read(buf, "<f4", int(np.prod(s))).astype(np.float64).reshape(s)
                         for name, s in shp.items()}
        elif dtype == 1:
            in_exp, w_exp, out_exp = struct.unpack("<bbb", buf.read(3))
            w = _read(buf, "<i4", int(np.prod(shp["w"]))).astype(np.int64).reshape(shp["w"])
            b = _read(buf, "<i8", shp["b"][0]).astype(np.int64)
            slope, slope_exp = None, 0
            if layer.activation == "prelu":
                slope_exp = struct.unpack("<b", buf.read(1))[0]
                slope = _read(buf, "<i4", layer.out_ch).astype(np.int64)
            quantized.append(QuantizedLayer(
                kind=layer.kind, in_ch=layer.in_ch, out_ch=layer.out_ch, kernel=layer.kernel,
                stride=layer.stride, padding=layer.padding, weight=w, bias=b, in_exp=in_exp,
                w_exp=w_exp, out_exp=out_exp, activation=layer.activation, slope=slope,
                slope_exp=slope_exp, skip=layer.skip, injection=layer.injection,
                output_padding=layer.output_padding))
        else:
            raise CheckpointError(f"unknown dtype code {dtype}")
    if buf.read(1):
        raise CheckpointError("trailing bytes after last layer")
    if len(dtypes) > 1:
        raise CheckpointError("mixed float and quantized layers")
    spec = NetworkSpec(layers, NETWORK_KINDS[kind])
    if dtypes == {1}:
        return spec, None, quantized
    return spec, params, None


def save(path, spec, params=None, quantized=None):
    with open(path, "wb") as f:
        f.write(dumps(spec, params, quantized))


def load(path):
    with open(path, "rb") as f:
        return loads(f.read())
