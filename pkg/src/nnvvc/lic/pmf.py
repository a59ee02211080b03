"""Integer discretized-logistic probabilities for the latent alphabet.

Everything here is integer arithmetic on top of two lookup tables that are
generated with :mod:`decimal` (software arithmetic, correctly rounded), so
the encoder and decoder derive identical frequency tables on any platform.

Fixed-point conventions: ``mu`` and ``log_scale`` arrive at exponent -12.
The log scale is clipped to [-3, 4] and indexed in 1/256 steps; the inverse
scale is held at 2**-16; the logistic argument ``u`` is held at 2**-16 and
the sigmoid table is sampled every 1/256 over [-24, 24] with linear
interpolation. CDF values are 30-bit.
"""
from decimal import ROUND_HALF_UP, Decimal, localcontext
from functools import lru_cache

import numpy as np

from ..entropy import build_freq_table
from ..nn.quant import round_shift

SYM_LO, SYM_HI = -127, 128
NUM_SYMBOLS = SYM_HI - SYM_LO + 1
LOG_SCALE_RANGE = (-3.0, 4.0)
PARAM_EXP = -12
CDF_BITS = 30
INV_BITS = 16
U_BITS = 16
SIG_STEP_BITS = 8
SIG_RANGE = 24
_R_STEP_BITS = 8
_R_LO = int(LOG_SCALE_RANGE[0]) << _R_STEP_BITS
_R_HI = int(LOG_SCALE_RANGE[1]) << _R_STEP_BITS
_U_MAX = SIG_RANGE << U_BITS


def _to_int(value, bits):
    return int((value * (1 << bits)).to_integral_value(rounding=ROUND_HALF_UP))


@lru_cache(maxsize=1)
def sigmoid_table():
    """round(2**30 * sigmoid(j / 256)) for j in [-24*256, 24*256], plus one guard entry."""
    n = SIG_RANGE << SIG_STEP_BITS
    out = []
    with localcontext() as ctx:
        ctx.prec = 40
        step = Decimal(1) / Decimal(1 << SIG_STEP_BITS)
        for j in range(-n, n + 1):
            out.append(_to_int(Decimal(1) / (Decimal(1) + (-(j * step)).exp()), CDF_BITS))
    out.append(out[-1])
    return np.array(out, dtype=np.int64)


@lru_cache(maxsize=1)
def inv_scale_table():
    """round(2**16 * exp(-j / 256)) for j in [-768, 1024]."""
    out = []
    with localcontext() as ctx:
        ctx.prec = 40
        step = Decimal(1) / Decimal(1 << _R_STEP_BITS)
        for j in range(_R_LO, _R_HI + 1):
            out.append(_to_int((-(j * step)).exp(), INV_BITS))
    return np.array(out, dtype=np.int64)


def integer_cdf(mu_q, log_scale_q):
    """30-bit CDF at the ``NUM_SYMBOLS + 1`` bin edges; shape (M, 257).

    The first and last edges are pinned to 0 and 2**30 so the outermost
    bins absorb the tails.
    """
    mu = np.clip(np.asarray(mu_q, dtype=np.int64).reshape(-1), SYM_LO << 12, SYM_HI << 12)
    r = round_shift(np.asarray(log_scale_q, dtype=np.int64).reshape(-1), -PARAM_EXP - _R_STEP_BITS)
    r = np.clip(r, _R_LO, _R_HI)
    inv = inv_scale_table()[r - _R_LO]
    edges = ((np.arange(SYM_LO, SYM_HI + 2, dtype=np.int64) << 1) - 1) << 11  # (k - 0.5) at 2**-12
    d = edges[None, :] - mu[:, None]
    u = round_shift(d * inv[:, None], -PARAM_EXP + INV_BITS - U_BITS)
    u = np.clip(u, -_U_MAX, _U_MAX)
    shift = U_BITS - SIG_STEP_BITS
    idx = (u >> shift) + (SIG_RANGE << SIG_STEP_BITS)
    frac = u & ((1 << shift) - 1)
    tab = sigmoid_table()
    lo = tab[idx]
    cdf = lo + (((tab[idx + 1] - lo) * frac + (1 << (shift - 1))) >> shift)
    cdf[:, 0] = 0
    cdf[:, -1] = 1 << CDF_BITS
    return cdf


def integer_pmf(mu_q, log_scale_q):
    """Integer bin weights (M, 256) summing to 2**30 per row."""
    return np.diff(integer_cdf(mu_q, log_scale_q), axis=1)


def frequency_tables(mu_q, log_scale_q):
    """Per-element rANS tables over [-127, 128] from integer logistic parameters."""
    return build_freq_table(integer_pmf(mu_q, log_scale_q), SYM_LO)
