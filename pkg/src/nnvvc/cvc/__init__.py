"""Toy conventional block codec standing in for the inter codec."""
from .codec import (FRAME_TYPES, INJECTED, INTER, INTRA, INTRA_LOSSLESS, MB, SEARCH, CvcConfig, CvcStream,
                    FrameRecord, MissingReferenceError, cvc_decode, cvc_encode, is_intra_position,
                    motion_search, splice_lossless)
from .transform import fdct, idct, qp_to_step

__all__ = [
    "FRAME_TYPES", "INJECTED", "INTER", "INTRA", "INTRA_LOSSLESS", "MB", "SEARCH", "CvcConfig", "CvcStream",
    "FrameRecord", "MissingReferenceError", "cvc_decode", "cvc_encode", "fdct", "idct",
    "is_intra_position", "motion_search", "qp_to_step", "splice_lossless",
]
