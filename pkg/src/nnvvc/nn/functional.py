"""Raw numpy convolution kernels shared by the float and quantized paths.

All images are NCHW. Conv weights are (out, in, k, k); transposed-conv
weights are (in, out, k, k).
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ConfigurationError(ValueError):
    """Raised for shape or layer-parameter mismatches."""


def conv_out_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def tconv_out_size(size, kernel, stride, padding, output_padding=0):
    return (size - 1) * stride - 2 * padding + kernel + output_padding


def im2col(x, kernel, stride, padding):
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = conv_out_size(h, kernel, stride, padding)
    wo = conv_out_size(w, kernel, stride, padding)
    if ho <= 0 or wo <= 0:
        raise ConfigurationError(f"input {h}x{w} too small for kernel {kernel}")
    win = sliding_window_view(x, (kernel, kernel), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kernel * kernel)
    return cols, ho, wo


def col2im(cols, shape, kernel, stride, padding, out_hw):
    """Scatter-add (N*Ho*Wo, C*k*k) columns back into an (N, C, H, W) image.

    ``out_hw`` is the (Ho, Wo) grid the columns were taken on. The padded
    canvas is cropped by ``padding`` on every side.
    """
    n, c, h, w = shape
    ho, wo = out_hw
    hp, wp = h + 2 * padding, w + 2 * padding
    hp = max(hp, (ho - 1) * stride + kernel)
    wp = max(wp, (wo - 1) * stride + kernel)
    canvas = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    blocks = cols.reshape(n, ho, wo, c, kernel, kernel).transpose(0, 3, 4, 5, 1, 2)
    for i in range(kernel):
        for j in range(kernel):
            canvas[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += blocks[:, :, i, j]
    return canvas[:, :, padding : padding + h, padding : padding + w]


def conv2d_raw(x, w, b, stride=1, padding=0):
    n, c = x.shape[:2]
    o, ci, k, k2 = w.shape
    if ci != c or k != k2:
        raise ConfigurationError(f"conv expects {ci} input channels, got {c}")
    cols, ho, wo = im2col(x, k, stride, padding)
    y = cols @ w.reshape(o, -1).T
    if b is not None:
        y += b
    return y.reshape(n, ho, wo, o).transpose(0, 3, 1, 2), cols


def conv2d_raw_backward(dy, x_shape, cols, w, stride, padding):
    n, o, ho, wo = dy.shape
    k = w.shape[-1]
    dmat = dy.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)
    dcols = dmat @ w.reshape(o, -1)
    dx = col2im(dcols, x_shape, k, stride, padding, (ho, wo))
    return dx, dw, db


def tconv2d_raw(x, w, b, stride=1, padding=0, output_padding=0):
    n, c, h, wd = x.shape
    ci, o, k, _ = w.shape
    if ci != c:
        raise ConfigurationError(f"transposed conv expects {ci} input channels, got {c}")
    ho = tconv_out_size(h, k, stride, padding, output_padding)
    wo = tconv_out_size(wd, k, stride, padding, output_padding)
    xmat = x.transpose(0, 2, 3, 1).reshape(-1, c)
    cols = xmat @ w.reshape(c, -1)
    y = col2im(cols, (n, o, ho, wo), k, stride, padding, (h, wd))
    if b is not None:
        y = y + b[None, :, None, None]
    return y, xmat


def tconv2d_raw_backward(dy, x_shape, xmat, w, stride, padding):
    n, c, h, wd = x_shape
    ci, o, k, _ = w.shape
    ho, wo = dy.shape[2:]
    hf = max((h - 1) * stride + k, ho + padding)
    wf = max((wd - 1) * stride + k, wo + padding)
    full = np.zeros((n, o, hf + padding, wf + padding), dtype=dy.dtype)
    full[:, :, padding : padding + ho, padding : padding + wo] = dy
    win = sliding_window_view(full, (k, k), axis=(2, 3))
    win = win[:, :, : (h - 1) * stride + 1 : stride, : (wd - 1) * stride + 1 : stride]
    dcols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * wd, o * k * k)
    dx = (dcols @ w.reshape(c, -1).T).reshape(n, h, wd, c).transpose(0, 3, 1, 2)
    dw = (xmat.T @ dcols).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def conv2d_naive(x, w, b, stride=1, padding=0):
    """Quadruple-loop reference cross-correlation (slow; for tests)."""
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = conv_out_size(h, k, stride, padding)
    wo = conv_out_size(wd, k, stride, padding)
    y = np.zeros((n, o, ho, wo))
    for bi in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[bi, :, i * stride : i * stride + k, j * stride : j * stride + k]
                    y[bi, oc, i, j] = float(np.sum(patch * w[oc])) + (0.0 if b is None else b[oc])
    return y
