"""Central finite-difference helpers shared by the autodiff tests."""
import numpy as np

from nnvvc.nn import autograd as ag


def numeric_grad(fn, var, h=1e-5):
    g = np.zeros_like(var.value)
    flat = var.value.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = float(fn().value)
        flat[i] = old - h
        down = float(fn().value)
        flat[i] = old
        gf[i] = (up - down) / (2 * h)
    return g


def relative_error(fn, variables, h=1e-5):
    """Max over variables of ||analytic - numeric|| / max(||analytic||, ||numeric||)."""
    for v in variables:
        v.grad = None
    loss = fn()
    ag.backward(loss)
    worst = 0.0
    for v in variables:
        analytic = v.grad if v.grad is not None else np.zeros_like(v.value)
        numeric = numeric_grad(fn, v, h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    return worst
