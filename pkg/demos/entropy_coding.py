"""
Entropy coding with integer frequency tables
============================================

A discretized logistic is turned into a 14-bit frequency table, a latent
is coded with rANS, and the coded size is compared with the ideal code
length. Run with ``python demos/entropy_coding.py``.
"""
import numpy as np

from nnvvc.entropy import build_freq_table, estimate_rate, rans_decode, rans_encode
from nnvvc.lic import pmf

rng = np.random.default_rng(0)

# one shared table: mean 0.3, log-scale 0.5, both at the 2**-12 fixed point
mu_q, ls_q = np.array([int(0.3 * 4096)]), np.array([int(0.5 * 4096)])
table = build_freq_table(pmf.integer_pmf(mu_q, ls_q)[0], pmf.SYM_LO)
print("table covers", table.size, "symbols, smallest count", table.freqs.min(), "total", table.freqs.sum())

# draw symbols from the table itself so the estimate is the right yardstick
p = table.freqs / table.freqs.sum()
symbols = rng.choice(table.size, 20000, p=p) + table.s_min

chunk = rans_encode(symbols, table)
decoded = rans_decode(chunk, table, len(symbols))
assert np.array_equal(decoded, symbols)

ideal = estimate_rate(symbols, table)
print(f"ideal {ideal:.1f} bits, coded {chunk.bits} bits, overhead {chunk.bits - ideal:.1f} bits")
print(f"{chunk.bits / len(symbols):.3f} bits per symbol")

# per-element tables work the same way: every symbol gets its own row
mus = rng.normal(0, 2, 1000)
rows = build_freq_table(pmf.integer_pmf((mus * 4096).astype(np.int64), np.zeros(1000, np.int64)), pmf.SYM_LO)
latent = np.clip(np.round(mus + rng.logistic(0, 1, 1000)), pmf.SYM_LO, pmf.SYM_HI).astype(np.int64)
c2 = rans_encode(latent, rows)
assert np.array_equal(rans_decode(c2, rows, 1000), latent)
print(f"per-element tables: {c2.bits} bits for 1000 symbols (ideal {estimate_rate(latent, rows):.1f})")
