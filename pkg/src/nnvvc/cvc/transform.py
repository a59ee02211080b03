"""Integer 8x8 DCT-II, QP step law and scalar quantization."""
import math
from decimal import ROUND_HALF_UP, Decimal, localcontext

import numpy as np

from ..nn.quant import round_shift

TB = 8
DCT_BITS = 10
STEP_BITS = 16
QP_MIN, QP_MAX = 0, 63


def _dct_matrix():
    m = np.zeros((TB, TB), dtype=np.int64)
    for k in range(TB):
        ck = math.sqrt((1.0 if k == 0 else 2.0) / TB)
        for n in range(TB):
            v = ck * math.cos((2 * n + 1) * k * math.pi / (2 * TB)) * (1 << DCT_BITS)
            # no entry sits near a rounding boundary, so libm differences cannot flip it
            assert abs(abs(v - math.floor(v)) - 0.5) > 1e-6
            m[k, n] = int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))
    return m


DCT = _dct_matrix()


def _zigzag():
    order = sorted(((y, x) for y in range(TB) for x in range(TB)),
                   key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1]))
    return np.array([y * TB + x for y, x in order], dtype=np.int64)


ZIGZAG = _zigzag()
INV_ZIGZAG = np.argsort(ZIGZAG)


def check_qp(qp):
    if not isinstance(qp, (int, np.integer)) or not QP_MIN <= qp <= QP_MAX:
        raise ValueError(f"qp must be an integer in [{QP_MIN}, {QP_MAX}], got {qp!r}")
    return int(qp)


def qp_to_step(qp):
    """Quantizer step size 2**((qp - 4) / 6)."""
    qp = check_qp(qp)
    return 2.0 ** ((qp - 4) / 6.0)


def _step_table():
    out = []
    with localcontext() as ctx:
        ctx.prec = 40
        ln2 = Decimal(2).ln()
        for qp in range(QP_MIN, QP_MAX + 1):
            v = (ln2 * Decimal(qp - 4) / Decimal(6)).exp() * (1 << STEP_BITS)
            out.append(int(v.to_integral_value(rounding=ROUND_HALF_UP)))
    return np.array(out, dtype=np.int64)


STEP_Q = _step_table()


def fdct(blocks):
    """(..., 8, 8) integer residual -> orthonormal DCT coefficients, rounded."""
    b = np.asarray(blocks, dtype=np.int64)
    return round_shift(DCT @ b @ DCT.T, 2 * DCT_BITS)


def idct(coefs):
    c = np.asarray(coefs, dtype=np.int64)
    return round_shift(DCT.T @ c @ DCT, 2 * DCT_BITS)


def quantize(coefs, qp, offset_sixths=3):
    """level = sign(c) * floor(|c| / step + offset), offset in sixths (3 = nearest)."""
    step = int(STEP_Q[check_qp(qp)])
    c = np.asarray(coefs, dtype=np.int64)
    mag = ((np.abs(c) << STEP_BITS) * 6 + offset_sixths * step) // (6 * step)
    return np.where(c < 0, -mag, mag)


def dequantize(levels, qp):
    step = int(STEP_Q[check_qp(qp)])
    lv = np.asarray(levels, dtype=np.int64)
    return np.sign(lv) * ((np.abs(lv) * step + (1 << (STEP_BITS - 1))) >> STEP_BITS)
