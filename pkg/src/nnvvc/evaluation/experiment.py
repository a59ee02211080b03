"""Ablation matrix: five coding configurations over the six rate points."""
import csv
import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from ..lic.ladder import NOMINAL_QPS
from ..lic.model import LicConfig, context_spec, decoder_spec, encoder_spec, prior_spec
from ..adapters import adapter_spec
from ..nn.macs import count_macs
from ..pipeline import FLAG_IMA, EncodeConfig, Models, bits_per_pixel, vcm_decode_full, vcm_encode
from .bd import RdCurve, bd_metric
from .metrics import feature_fidelity, psnr, sequence_map

ANCHOR = "anchor"
CONFIGS = ("no-adapters", "iha", "ima", "iha+ima")
ALL_CONFIGS = (ANCHOR,) + CONFIGS
METRICS = ("psnr", "feat_fidelity", "map")
CSV_FIELDS = ("config", "qp", "bpp", "psnr", "feat_fidelity", "map")


@dataclass
class Report:
    rows: list  # dicts keyed by CSV_FIELDS
    curves: dict  # config -> RdCurve
    bd: dict  # (config, metric) -> BdResult

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, CSV_FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})

    def bd_rows(self):
        out = []
        for cfg in self.curves:
            row = {"config": cfg}
            for m in METRICS:
                r = self.bd.get((cfg, m))
                row[f"bd_rate_{m}"] = r.bd_rate if r else float("nan")
                row[f"bd_task_{m}"] = r.bd_task if r else float("nan")
            out.append(row)
        return out

    def write_svg(self, path_pattern):
        """One static plot per metric; ``path_pattern`` contains ``{metric}``."""
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        paths = []
        for m in METRICS:
            fig, ax = plt.subplots(figsize=(5, 3.6))
            for cfg, curve in self.curves.items():
                ax.plot(curve.rates, curve.values(m), marker="o", label=cfg)
            ax.set_xscale("log")
            ax.set_xlabel("bits per pixel per frame")
            ax.set_ylabel(m)
            ax.legend(fontsize=7)
            fig.tight_layout()
            path = path_pattern.format(metric=m)
            fig.savefig(path, format="svg")
            plt.close(fig)
            paths.append(path)
        return paths


def read_rows(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows or set(CSV_FIELDS) - set(rows[0]):
        raise ValueError(f"{path}: expected columns {', '.join(CSV_FIELDS)}")
    return [{k: (r[k] if k == "config" else (int(r[k]) if k == "qp" else float(r[k]))) for k in CSV_FIELDS}
            for r in rows]


def curves_from_rows(rows):
    curves = {}
    for cfg in dict.fromkeys(r["config"] for r in rows):
        sel = sorted((r for r in rows if r["config"] == cfg), key=lambda r: r["bpp"])
        curves[cfg] = RdCurve.from_arrays(cfg, [r["bpp"] for r in sel],
                                          {m: [r[m] for r in sel] for m in METRICS})
    return curves


def bd_table(curves, anchor=ANCHOR):
    return {(cfg, m): bd_metric(curves[anchor], c, m) for cfg, c in curves.items() for m in METRICS}


def report_from_rows(rows, anchor=ANCHOR):
    curves = curves_from_rows(rows)
    return Report(rows, curves, bd_table(curves, anchor) if anchor in curves else {})


def _score(seq, boxes, decoded):
    return {
        "psnr": float(np.mean([psnr(a, b) for a, b in zip(seq, decoded)])),
        "feat_fidelity": float(np.mean([feature_fidelity(a, b) for a, b in zip(seq, decoded)])),
        "map": sequence_map(decoded, boxes),
    }


def evaluate_sequence(seq, boxes, qp, models, intra_period=8, workers=1, configs=ALL_CONFIGS):
    """Metrics of every configuration for one sequence at one target QP."""
    frames = list(seq)
    out = {}
    if ANCHOR in configs:
        cfg = EncodeConfig(qp, intra_period, use_ima=False, force_fallback=True, workers=workers)
        bs = vcm_encode(frames, cfg, models)
        dec = vcm_decode_full(bs, models, workers).frames
        out[ANCHOR] = {"bpp": bits_per_pixel(bs), **_score(frames, boxes, dec)}
    for use_iha in (False, True):
        names = [c for c in configs if c != ANCHOR and ("iha" in c) == use_iha]
        if not names:
            continue
        cfg = EncodeConfig(qp, intra_period, use_iha=use_iha, use_ima=False, workers=workers)
        bs = vcm_encode(frames, cfg, models)
        res = vcm_decode_full(bs, models, workers)
        for name in names:
            if "ima" in name:
                # same payloads; only the decoder-side flag differs
                bs_ima = dataclasses.replace(bs, flags=bs.flags | FLAG_IMA)
                dec = vcm_decode_full(bs_ima, models, workers).frames
                rate = bits_per_pixel(bs_ima)
            else:
                dec, rate = res.frames, bits_per_pixel(bs)
            out[name] = {"bpp": rate, **_score(frames, boxes, dec)}
    return out


def run_experiment(models, sequences, qps=NOMINAL_QPS, configs=ALL_CONFIGS, intra_period=8, workers=1,
                   progress=None):
    """Run the matrix over ``sequences`` (each with ``frames`` and ``boxes``).

    Rows hold sequence-averaged bpp and metrics per (config, qp).
    """
    acc = {(c, q): [] for c in configs for q in qps}
    for si, seq in enumerate(sequences):
        for q in qps:
            res = evaluate_sequence(seq.frames, seq.boxes, q, models, intra_period, workers, configs)
            for c, vals in res.items():
                acc[(c, q)].append(vals)
            if progress:
                progress(si, q)
    rows = []
    for c in configs:
        for q in qps:
            vals = acc[(c, q)]
            rows.append({"config": c, "qp": q,
                         **{k: float(np.mean([v[k] for v in vals])) for k in ("bpp",) + METRICS}})
    return report_from_rows(rows, ANCHOR if ANCHOR in configs else None)


def complexity_rows(lic_cfg=None, adapter_base=32, input_hw=(256, 256)):
    """(process, kMACs/pixel, parameters) for the five NN components."""
    cfg = lic_cfg or LicConfig()
    prob = [prior_spec(cfg)] + [context_spec(cfg, k) for k in range(1, cfg.groups)]
    lat_hw = (input_hw[0] // 16, input_hw[1] // 16)
    n_px = input_hw[0] * input_hw[1]

    def cost(spec, hw):
        k, p = count_macs(spec, hw)
        return k * hw[0] * hw[1] / n_px, p

    # the prior runs once per image on a single pixel, the context models on the latent grid
    pm = [cost(prob[0], (1, 1))] + [cost(s, lat_hw) for s in prob[1:]]
    pm_k, pm_p = sum(k for k, _ in pm), sum(p for _, p in pm)
    enc_k, enc_p = cost(encoder_spec(cfg), input_hw)
    dec_k, dec_p = cost(decoder_spec(cfg), lat_hw)
    rows = [("Intra encoding", enc_k + pm_k, enc_p + pm_p), ("Intra decoding", dec_k + pm_k, dec_p + pm_p)]
    for name, kind in (("IHA", "iha"), ("IMA", "ima"), ("IMA - fallback mode", "fima")):
        k, p = count_macs(adapter_spec(kind, adapter_base), input_hw)
        rows.append((name, k, p))
    return rows


def format_complexity(rows):
    lines = [f"{'Process':<22}{'kMACs/pixel':>14}{'Parameters':>12}"]
    lines += [f"{name:<22}{k:>14.2f}{p:>12d}" for name, k, p in rows]
    return "\n".join(lines)


def evaluate_system(cfg=None, cache=None, sequences=5, workers=1, log=print):
    """Train (or load) the system for ``cfg`` and run the matrix on held-out data.

    The report is cached next to the models as ``results.csv``.
    """
    from ..training.system import SystemConfig, build_system, held_out_sequences, system_dir

    cfg = cfg or SystemConfig()
    models = build_system(cfg, cache, log, workers)
    path = os.path.join(system_dir(cfg, cache), f"results-{sequences}.csv")
    if os.path.exists(path):
        log(f"cached: {path}")
        return models, report_from_rows(read_rows(path))
    report = run_experiment(models, held_out_sequences(cfg, sequences), NOMINAL_QPS,
                            intra_period=cfg.intra_period, workers=workers)
    report.write_csv(path)
    return models, report
