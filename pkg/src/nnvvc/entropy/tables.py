"""Integer frequency tables for the rANS coder."""
from dataclasses import dataclass

import numpy as np

PRECISION = 14
TOTAL = 1 << PRECISION


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Frequencies summing to ``2**14`` over symbols ``s_min .. s_min + K - 1``.

    ``freqs`` is (K,) for a shared table or (n, K) for one table per coded
    element.
    """

    s_min: int
    freqs: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.int64)
        object.__setattr__(self, "freqs", f)
        if f.shape[-1] == 0:
            raise ValueError("empty symbol range")
        if np.any(f < 1):
            raise ValueError("every frequency must be >= 1")
        if np.any(f.sum(axis=-1) != TOTAL):
            raise ValueError(f"frequencies must sum to {TOTAL}")
        cum = np.zeros(f.shape[:-1] + (f.shape[-1] + 1,), dtype=np.int64)
        np.cumsum(f, axis=-1, out=cum[..., 1:])
        object.__setattr__(self, "cum", cum)
        object.__setattr__(self, "_lookup", None)

    @property
    def size(self):
        return self.freqs.shape[-1]

    @property
    def s_max(self):
        return self.s_min + self.size - 1

    @property
    def shared(self):
        return self.freqs.ndim == 1

    def __len__(self):
        return 1 if self.shared else self.freqs.shape[0]

    def lookup(self):
        """slot -> symbol index list for a shared table (cached)."""
        if not self.shared:
            raise ValueError("lookup is only defined for shared tables")
        if self._lookup is None:
            object.__setattr__(self, "_lookup", np.repeat(np.arange(self.size), self.freqs).tolist())
        return self._lookup


def _adjust(f, diff):
    """Move ``diff`` counts per row out of / into the largest bins (largest index wins ties)."""
    rows = np.arange(f.shape[0])
    k = f.shape[1]
    while True:
        live = diff != 0
        if not live.any():
            return f
        r = rows[live]
        sub = f[r]
        top = k - 1 - np.argmax(sub[:, ::-1], axis=1)
        fmax = sub[np.arange(r.size), top]
        d = diff[r]
        masked = sub.copy()
        masked[np.arange(r.size), top] = -1
        second = masked.max(axis=1) if k > 1 else np.zeros_like(fmax)
        gap = fmax - second
        take = np.where(d > 0, np.minimum(d, np.maximum(gap, 1)), d)
        f[r, top] -= take
        diff[r] -= take


def build_freq_table(probabilities, s_min=0):
    """Quantize integer probability weights to a :class:`FrequencyTable`.

    Each bin is rounded to the nearest count of ``2**14 * q / sum(q)``, raised
    to at least 1, and the sum is then corrected one count at a time against
    the currently largest bin (largest index on ties). All-zero rows are
    treated as uniform. Integer-only, so identical on every platform.
    """
    q = np.asarray(probabilities)
    if q.dtype.kind not in "iu":
        raise TypeError("probabilities must be integers (fixed-point), not floats")
    if q.shape[-1] == 0:
        raise ValueError("empty symbol range")
    if np.any(q < 0):
        raise ValueError("negative probability weight")
    shared = q.ndim == 1
    q = np.atleast_2d(q).astype(np.int64)
    if q.size and int(q.max()) >= 1 << 47:
        raise OverflowError("probability weights must be below 2**47")
    tot = q.sum(axis=1, keepdims=True)
    q = np.where(tot == 0, 1, q)
    tot = q.sum(axis=1, keepdims=True)
    f = (2 * q * TOTAL + tot) // (2 * tot)
    f = np.maximum(f, 1)
    diff = f.sum(axis=1) - TOTAL
    f = _adjust(f, diff)
    return FrequencyTable(s_min, f[0] if shared else f)


def uniform_table(s_min, size):
    return build_freq_table(np.ones(size, dtype=np.int64), s_min)
