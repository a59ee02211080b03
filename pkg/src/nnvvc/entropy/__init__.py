"""rANS entropy coding over integer frequency tables."""
from .rans import (BitstreamChunk, CorruptStreamError, RansDecoder, RansEncoder, estimate_rate,
                   rans_decode, rans_encode, table_bits)
from .tables import PRECISION, TOTAL, FrequencyTable, build_freq_table, uniform_table

__all__ = [
    "BitstreamChunk", "CorruptStreamError", "FrequencyTable", "PRECISION", "RansDecoder",
    "RansEncoder", "TOTAL", "build_freq_table", "estimate_rate", "rans_decode", "rans_encode",
    "table_bits", "uniform_table",
]
