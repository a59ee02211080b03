"""
A hybrid learned / block video codec, frame by frame
====================================================

Intra frames go through the learned image codec, the intra human adapter
cleans them up for use as references, the block codec predicts the inter
frames from those references, and the inter machine adapter touches up
the decoded inter frames for the machine consumer.

Uses the trained seed-0 system from the model cache when it exists;
otherwise trains a deliberately small ladder (about a minute) so the
demo runs anywhere. Run with ``python demos/hybrid_codec.py [models-dir]``.
"""
import os
import sys

import numpy as np

from nnvvc.adapters import AdapterModel
from nnvvc.evaluation import feature_fidelity, psnr
from nnvvc.pipeline import ROLES, EncodeConfig, Models, bits_per_pixel, mux, vcm_decode_full, vcm_encode
from nnvvc.training import LicTrainConfig, SyntheticDatasetSpec, SystemConfig, generate_synthetic, load_models
from nnvvc.training import system_dir, train_lic


def small_models():
    cfg = LicTrainConfig(epochs=12, checkpoints=(2, 4, 6, 8, 10, 12), latent_ch=8, groups=2, channels=(16, 16, 16),
                         pool_images=8, val_images=2, pool_size=(64, 64), patches_per_epoch=32, batch=8)
    ladder, _ = train_lic(cfg)
    # zero-epoch adapters are exact identities
    return Models(ladder, AdapterModel("iha", base=8), AdapterModel("ima", base=8), AdapterModel("fima", base=8))


root = sys.argv[1] if len(sys.argv) > 1 else system_dir(SystemConfig(seed=0))
if os.path.exists(os.path.join(root, "ima.nnvw")):
    print("models from", root)
    models = load_models(root)
else:
    print("no trained system cached; training a small ladder instead")
    models = small_models()
for m in models.ladder:
    print(f"  ladder QP {m.nominal_qp}: {m.bpp:.3f} bpp on its validation images")

seq = generate_synthetic(SyntheticDatasetSpec(width=96, height=64, frames=9, seed=123456))
frames = list(seq.frames)

# %%
# Encode at target QP 32: intra frames use QP 27 and the nearest ladder model
bs = vcm_encode(frames, EncodeConfig(32, intra_period=8), models)
data = mux(bs)
print(f"\n{len(frames)} frames -> {len(data)} bytes, {bits_per_pixel(bs):.3f} bpp")
for i, part in enumerate(bs.frames):
    print(f"  frame {i}: {ROLES[part.role]:<20} qp {part.qp:2d}  {8 * len(part.payload):6d} bits")

# %%
# Decode and compare the pre-adapter and the machine-output frames
res = vcm_decode_full(data, models)
print("\nframe  psnr(pre)  psnr(out)  fidelity(pre)  fidelity(out)")
for i, (x, pre, out) in enumerate(zip(frames, res.pre_adapter, res.frames)):
    print(f"{i:5d}  {psnr(x, pre):9.2f}  {psnr(x, out):9.2f}  {feature_fidelity(x, pre):13.2f}  "
          f"{feature_fidelity(x, out):13.2f}")

# %%
# The learned path is skipped entirely at very low quality
low = vcm_encode(frames, EncodeConfig(56, intra_period=8), models)
print(f"\ntarget QP 56: fallback={low.fallback}, roles {sorted({ROLES[p.role] for p in low.frames})}, "
      f"{bits_per_pixel(low):.3f} bpp")

# a strip of original / decoded frames for a quick look
try:
    from PIL import Image

    strip = np.concatenate([np.concatenate([f, o], axis=1) for f, o in zip(frames[:4], res.frames[:4])], axis=2)
    Image.fromarray(strip.transpose(1, 2, 0)).save("hybrid_codec.png")
    print("wrote hybrid_codec.png (top: input, bottom: decoded)")
except ImportError:
    pass
