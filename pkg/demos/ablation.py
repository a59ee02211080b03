"""
Ablation: which adapters pay for themselves?
============================================

Runs the five-configuration matrix (block-codec anchor, hybrid without
adapters, with the intra human adapter, with the inter machine adapter,
with both) over six rate points and reports Bjontegaard deltas against
the anchor.

With no argument the trained seed-0 system is loaded, or trained into
the model cache the first time (about an hour on one core). Pass
``--quick`` for a small untuned system that finishes in a couple of
minutes; its numbers only show the mechanics.
"""
import sys

from nnvvc.adapters import AdapterModel
from nnvvc.evaluation import evaluate_system, run_experiment
from nnvvc.lic.ladder import NOMINAL_QPS
from nnvvc.pipeline import Models
from nnvvc.training import LicTrainConfig, SystemConfig, held_out_sequences, train_lic

if "--quick" in sys.argv:
    lic = LicTrainConfig(epochs=12, checkpoints=(2, 4, 6, 8, 10, 12), latent_ch=8, groups=2, channels=(16, 16, 16),
                         pool_images=8, val_images=2, pool_size=(64, 64), patches_per_epoch=32, batch=8)
    ladder, _ = train_lic(lic)
    models = Models(ladder, AdapterModel("iha", base=8), AdapterModel("ima", base=8), AdapterModel("fima", base=8))
    report = run_experiment(models, held_out_sequences(SystemConfig(), 2), NOMINAL_QPS)
else:
    models, report = evaluate_system(SystemConfig(seed=0))

# %%
# Rate points per configuration (averaged over the held-out sequences)
for cfg, curve in report.curves.items():
    pts = "  ".join(f"{r:.3f}/{v:.1f}" for r, v in zip(curve.rates, curve.values("feat_fidelity")))
    print(f"{cfg:<12} bpp/fidelity  {pts}")

# %%
# Negative BD-rate means fewer bits for the same quality
print(f"\n{'config':<12}{'BD-rate fid':>12}{'BD-task fid':>12}{'BD-rate psnr':>13}{'BD-task mAP':>12}")
for row in report.bd_rows():
    print(f"{row['config']:<12}{row['bd_rate_feat_fidelity']:>11.2f}%{row['bd_task_feat_fidelity']:>12.3f}"
          f"{row['bd_rate_psnr']:>12.2f}%{row['bd_task_map']:>12.4f}")

report.write_csv("ablation.csv")
print("\nwrote ablation.csv and", ", ".join(report.write_svg("ablation_{metric}.svg")))
