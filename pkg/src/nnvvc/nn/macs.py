"""Multiply-accumulate and parameter counting for :class:`NetworkSpec`."""
from .functional import conv_out_size, tconv_out_size


def count_macs(spec, input_hw):
    """Return (kMACs per input pixel, parameter count).

    conv: outH*outW*outC*inC*k^2. Transposed conv is counted on its input
    grid, inH*inW*inC*outC*k^2, which is the number of products it performs.
    Injection generators count in*out once per image. Parameters include
    biases and PReLU slopes.
    """
    if not spec.layers:
        return 0.0, 0
    h, w = input_hw
    macs = 0
    params = 0
    for layer in spec.layers:
        k2 = layer.kernel * layer.kernel
        if layer.kind == "linear":
            macs += layer.in_ch * layer.out_ch
            params += layer.in_ch * layer.out_ch + layer.out_ch
        elif layer.kind == "conv":
            ho = conv_out_size(h, layer.kernel, layer.stride, layer.padding)
            wo = conv_out_size(w, layer.kernel, layer.stride, layer.padding)
            macs += ho * wo * layer.out_ch * layer.in_ch * k2
            params += layer.out_ch * layer.in_ch * k2 + layer.out_ch
            h, w = ho, wo
        else:
            macs += h * w * layer.in_ch * layer.out_ch * k2
            params += layer.out_ch * layer.in_ch * k2 + layer.out_ch
            h = tconv_out_size(h, layer.kernel, layer.stride, layer.padding, layer.output_padding)
            w = tconv_out_size(w, layer.kernel, layer.stride, layer.padding, layer.output_padding)
        if layer.activation == "prelu":
            params += layer.out_ch
    return macs / (input_hw[0] * input_hw[1]) / 1000.0, params
