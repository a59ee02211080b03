"""Loss terms for LIC and adapter training."""
import numpy as np

from ..nn import autograd as ag
from ..nn.functional import ConfigurationError
from ..nn.network import LayerSpec, Network, NetworkSpec, init_params
from .lws import LwsSchedule

TRAIN_PROXY_SEED = 42
EVAL_PROXY_SEED = 7
ADAPTER_PROXY_WEIGHTS = {"iha": 0.0, "ima": 0.1, "fima": 0.015}


def proxy_spec():
    return NetworkSpec([
        LayerSpec("conv", 3, 16, 3, 1, 1, "relu"),
        LayerSpec("conv", 16, 32, 3, 2, 1, "relu"),
        LayerSpec("conv", 32, 32, 3, 2, 1, "relu"),
        LayerSpec("conv", 32, 64, 3, 2, 1, "relu"),
    ], "proxy")


class ProxyExtractor:
    """Frozen multi-stage feature network standing in for a task backbone."""

    def __init__(self, seed=TRAIN_PROXY_SEED, spec=None, params=None, weights=None):
        self.seed = seed
        self.spec = spec or proxy_spec()
        if params is None:
            params = init_params(self.spec, np.random.default_rng(seed))
        self.net = Network(self.spec, params)
        for v in self.net.parameters():
            v.requires_grad = False
        n = len(self.spec.layers)
        self.weights = tuple(weights) if weights is not None else (1.0 / n,) * n
        if len(self.weights) != n:
            raise ConfigurationError(f"{len(self.weights)} stage weights for {n} stages")

    def features(self, x):
        return self.net(ag.as_var(x), keep=True)[1:]

    @classmethod
    def identity(cls):
        """One 1x1 stage that passes the image through (reduces the loss to MSE)."""
        spec = NetworkSpec([LayerSpec("conv", 3, 3, 1)], "proxy")
        params = {0: {"w": np.eye(3).reshape(3, 3, 1, 1), "b": np.zeros(3)}}
        return cls(None, spec, params, (1.0,))


_extractors = {}


def extractor(seed=TRAIN_PROXY_SEED):
    if seed not in _extractors:
        _extractors[seed] = ProxyExtractor(seed)
    return _extractors[seed]


def mse_loss(a, b):
    return ag.mse(a, b)


def adapter_mse(x1, x2_hat):
    """Mean squared error between the uncompressed frame and the adapted one."""
    return ag.mse(x1, x2_hat)


def rate_loss(y_hat, model):
    """Mean code length in bits per latent element under ``model``'s prior."""
    bits = y_hat if model is None else model.latent_bits(y_hat)
    return ag.mean(bits)


def proxy_loss(x, x_hat, ext=None):
    ext = ext or extractor()
    fa, fb = ext.features(x), ext.features(x_hat)
    loss = None
    for w, a, b in zip(ext.weights, fa, fb):
        term = ag.scale(ag.mse(a, b), w)
        loss = term if loss is None else ag.add(loss, term)
    return loss


def combine(terms, weights):
    """Weighted sum of scalar Vars, skipping zero weights."""
    loss = None
    for t, w in zip(terms, weights):
        if w == 0 or t is None:
            continue
        term = ag.scale(t, w)
        loss = term if loss is None else ag.add(loss, term)
    return loss if loss is not None else ag.Var(np.array(0.0))


def total_loss_lic(x, x_hat, y_hat, n, model=None, schedule=None, ext=None, bits=None):
    """w_rate * L_rate + w_mse * L_mse + w_task * L_proxy at epoch ``n``.

    Returns ``(loss, parts)`` where ``parts`` maps term names to floats.
    """
    w_rate, w_mse, w_task = (schedule or LwsSchedule()).weights(n)
    l_rate = ag.mean(bits) if bits is not None else rate_loss(y_hat, model)
    l_mse = mse_loss(x, x_hat)
    l_task = proxy_loss(x, x_hat, ext) if w_task else None
    loss = combine((l_rate, l_mse, l_task), (w_rate, w_mse, w_task))
    parts = {"rate": float(l_rate.value), "mse": float(l_mse.value),
             "task": float(l_task.value) if l_task is not None else 0.0}
    return loss, parts


def total_loss_adapter(x1, x2_hat, kind, ext=None):
    """L_mse_A + w_proxy * L_proxy_A with the per-kind weight."""
    if kind not in ADAPTER_PROXY_WEIGHTS:
        raise ConfigurationError(f"unknown adapter kind {kind!r}")
    w = ADAPTER_PROXY_WEIGHTS[kind]
    l_mse = adapter_mse(x1, x2_hat)
    l_proxy = proxy_loss(x1, x2_hat, ext) if w else None
    loss = combine((l_mse, l_proxy), (1.0, w))
    parts = {"mse": float(l_mse.value), "proxy": float(l_proxy.value) if l_proxy is not None else 0.0}
    return loss, parts
