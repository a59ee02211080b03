"""Minimal reverse-mode autodiff over a fixed operator set.

Every op returns a :class:`Var` holding a float64 value plus a closure that
maps the output gradient to parent gradients. :func:`backward` walks the
graph in reverse topological order.
"""
import numpy as np

from . import functional as F


class GraphError(RuntimeError):
    """Raised when backward is requested on a graph with no trainable inputs."""


class Var:
    __slots__ = ("value", "grad", "parents", "grad_fn", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, parents=(), grad_fn=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.grad_fn = grad_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"


def as_var(x):
    return x if isinstance(x, Var) else Var(x)


def _node(value, parents, grad_fn):
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Var(value)
    return Var(value, parents=parents, grad_fn=grad_fn)


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every trainable leaf."""
    if loss.value.size != 1:
        raise ValueError("backward needs a scalar loss")
    if not loss.requires_grad:
        raise GraphError("loss is detached from every trainable parameter")
    order, seen, stack = [], set(), [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.grad_fn is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b):
    a, b = as_var(a), as_var(b)
    return _node(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_var(a), as_var(b)
    return _node(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_var(a), as_var(b)
    return _node(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def scale(a, c):
    return _node(a.value * c, (a,), lambda g: (g * c,))


def total(a):
    return _node(np.sum(a.value), (a,), lambda g: (np.full(a.shape, g),))


def mean(a):
    n = a.value.size
    return _node(np.mean(a.value), (a,), lambda g: (np.full(a.shape, g / n),))


def relu(x):
    mask = x.value > 0
    return _node(x.value * mask, (x,), lambda g: (g * mask,))


def prelu(x, slope):
    """Per-channel PReLU; ``slope`` has shape (C,) and x is (N, C, ...)."""
    shp = (1, -1) + (1,) * (x.value.ndim - 2)
    a = slope.value.reshape(shp)
    neg = x.value < 0
    out = np.where(neg, x.value * a, x.value)

    def grad_fn(g):
        gx = np.where(neg, g * a, g)
        gs = np.where(neg, g * x.value, 0.0)
        axes = (0,) + tuple(range(2, x.value.ndim))
        return gx, gs.sum(axis=axes)
    return _node(out, (x, slope), grad_fn)


def conv2d(x, w, b=None, stride=1, padding=0):
    y, cols = F.conv2d_raw(x.value, w.value, None if b is None else b.value, stride, padding)

    def grad_fn(g):
        if x.requires_grad:
            dx, dw, db = F.conv2d_raw_backward(g, x.shape, cols, w.value, stride, padding)
        else:
            dmat = g.transpose(0, 2, 3, 1).reshape(-1, g.shape[1])
            dx, dw, db = None, (dmat.T @ cols).reshape(w.shape), dmat.sum(axis=0)
        return (dx, dw) if b is None else (dx, dw, db)
    parents = (x, w) if b is None else (x, w, b)
    return _node(y, parents, grad_fn)


def conv_transpose2d(x, w, b=None, stride=1, padding=0, output_padding=0):
    y, xmat = F.tconv2d_raw(x.value, w.value, None if b is None else b.value,
                            stride, padding, output_padding)

    def grad_fn(g):
        dx, dw, db = F.tconv2d_raw_backward(g, x.shape, xmat, w.value, stride, padding)
        return (dx, dw) if b is None else (dx, dw, db)
    parents = (x, w) if b is None else (x, w, b)
    return _node(y, parents, grad_fn)


def linear(x, w, b=None):
    """x: (N, in), w: (out, in)."""
    y = x.value @ w.value.T
    if b is not None:
        y = y + b.value

    def grad_fn(g):
        gx, gw = g @ w.value, g.T @ x.value
        return (gx, gw) if b is None else (gx, gw, g.sum(axis=0))
    parents = (x, w) if b is None else (x, w, b)
    return _node(y, parents, grad_fn)


def concat(xs, axis=1):
    sizes = [x.shape[axis] for x in xs]
    edges = np.cumsum([0] + sizes)

    def grad_fn(g):
        return tuple(np.take(g, np.arange(edges[i], edges[i + 1]), axis=axis) for i in range(len(xs)))
    return _node(np.concatenate([x.value for x in xs], axis=axis), xs, grad_fn)


def crop(x, top, left, height, width):
    out = x.value[:, :, top : top + height, left : left + width]

    def grad_fn(g):
        full = np.zeros_like(x.value)
        full[:, :, top : top + height, left : left + width] = g
        return (full,)
    return _node(out, (x,), grad_fn)


def tile_spatial(v, height, width):
    """(N, C) -> (N, C, H, W) by repetition."""
    out = np.broadcast_to(v.value[:, :, None, None], v.shape + (height, width)).copy()
    return _node(out, (v,), lambda g: (g.sum(axis=(2, 3)),))


def clip(x, lo, hi):
    """Clamp with straight-through gradient."""
    return _node(np.clip(x.value, lo, hi), (x,), lambda g: (g,))


def ste_round(x):
    """Hard rounding forward, identity gradient backward."""
    return _node(np.round(x.value), (x,), lambda g: (g,))


def mse(a, b):
    a, b = as_var(a), as_var(b)
    if a.shape != b.shape:
        raise F.ConfigurationError(f"mse shape mismatch {a.shape} vs {b.shape}")
    d = a.value - b.value
    n = d.size
    return _node(np.mean(d * d), (a, b), lambda g: (g * 2 * d / n, -g * 2 * d / n))


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def logistic_bits(symbols, mu, log_scale, lo=-127, hi=128, log_scale_range=(-3.0, 4.0), floor=2.0**-14):
    """Per-element code length in bits under a discretized logistic.

    Bins are the integers ``lo..hi``; the outermost bins absorb the tails.
    Bins below ``floor`` are raised to it and the deficit is taken from the
    most probable bin (largest index on ties), which is how integer tables are
    built for the entropy coder. ``symbols`` are treated as continuous inside
    their own bin so the op is differentiable in all three inputs.
    """
    y, m = symbols.value, mu.value
    r_raw = log_scale.value
    r_lo, r_hi = log_scale_range
    r = np.clip(r_raw, r_lo, r_hi)
    r_live = (r_raw > r_lo) & (r_raw < r_hi)
    inv = np.exp(-r)
    shape = y.shape
    y, m, inv = y.ravel(), m.ravel(), inv.ravel()
    k = hi - lo + 1

    edges = np.arange(lo - 0.5, hi + 1.0)
    u = (edges[None, :] - m[:, None]) * inv[:, None]
    c = _sigmoid(u)
    dc = c * (1.0 - c)
    c[:, 0], c[:, -1] = 0.0, 1.0
    dc[:, 0], dc[:, -1] = 0.0, 0.0
    p = np.diff(c, axis=1)
    small = p < floor
    deficit = np.where(small, floor - p, 0.0).sum(axis=1)
    pm = np.where(small, floor, p)
    amax = k - 1 - np.argmax(pm[:, ::-1], axis=1)

    idx = np.clip(np.round(y) - lo, 0, k - 1).astype(np.int64)
    u_hi = (y + 0.5 - m) * inv
    u_lo = (y - 0.5 - m) * inv
    s_hi, s_lo = _sigmoid(u_hi), _sigmoid(u_lo)
    d_hi, d_lo = s_hi * (1 - s_hi), s_lo * (1 - s_lo)
    top, bottom = idx == k - 1, idx == 0
    s_hi = np.where(top, 1.0, s_hi)
    d_hi = np.where(top, 0.0, d_hi)
    s_lo = np.where(bottom, 0.0, s_lo)
    d_lo = np.where(bottom, 0.0, d_lo)
    u_hi, u_lo = np.where(top, 0.0, u_hi), np.where(bottom, 0.0, u_lo)
    p_sym = s_hi - s_lo

    is_max = idx == amax
    is_small = small[np.arange(idx.size), idx] & ~is_max
    p_eff = np.where(is_max, p_sym - deficit, np.where(is_small, floor, p_sym))
    guard = p_eff < floor
    p_eff = np.maximum(p_eff, floor)
    bits = -np.log2(p_eff)

    def grad_fn(g):
        g = g.ravel()
        live = ~(is_small | guard)
        coef = np.where(live, -g / (np.log(2.0) * p_eff), 0.0)
        dp_dy = (d_hi - d_lo) * inv
        dp_dm = -dp_dy
        dp_dr = -(d_hi * u_hi - d_lo * u_lo)
        # deficit correction for the bin that pays for the floors
        bin_dm = -(dc[:, 1:] - dc[:, :-1]) * inv[:, None]
        bin_dr = -(dc[:, 1:] * u[:, 1:] - dc[:, :-1] * u[:, :-1])
        sm = np.where(small, 1.0, 0.0)
        dD_dm = -(bin_dm * sm).sum(axis=1)
        dD_dr = -(bin_dr * sm).sum(axis=1)
        dm = coef * (dp_dm - np.where(is_max, dD_dm, 0.0))
        dr = coef * (dp_dr - np.where(is_max, dD_dr, 0.0))
        dy = coef * dp_dy
        return dy.reshape(shape), dm.reshape(shape), (dr * r_live.ravel()).reshape(shape)

    return _node(bits.reshape(shape), (symbols, mu, log_scale), grad_fn)
