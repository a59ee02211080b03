"""Print per-clip hashes of LIC decode + IHA outputs (run in a fresh process)."""
import hashlib
import json
import sys

import numpy as np

from nnvvc.pipeline import EncodeConfig, mux, vcm_decode_full, vcm_encode
from nnvvc.training import SyntheticDatasetSpec, generate_synthetic, load_models


def digest(frames):
    return hashlib.sha256(b"".join(np.ascontiguousarray(f).tobytes() for f in frames)).hexdigest()


def clip_hashes(models, workers, clips=10, qp=32):
    out = []
    for i in range(clips):
        frames = list(generate_synthetic(SyntheticDatasetSpec(width=96, height=64, frames=3, seed=700 + i)).frames)
        data = mux(vcm_encode(frames, EncodeConfig(qp + (i % 3) * 5, 2, workers=workers), models))
        res = vcm_decode_full(data, models, workers)
        out.append([digest(res.intra_lic.values()), digest(res.references.values()), digest(res.frames)])
    return out


def main():
    root = sys.argv[1]
    if root == "tiny":
        from tiny import tiny_models
        models = tiny_models()
    else:
        models = load_models(root)
    print(json.dumps({w: clip_hashes(models, int(w)) for w in sys.argv[2:]}))


if __name__ == "__main__":
    main()
