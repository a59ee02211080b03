"""Rate-performance curves and Bjontegaard deltas."""
from dataclasses import dataclass, field, replace

import numpy as np

SAMPLES = 1000


@dataclass(frozen=True)
class RdPoint:
    bitrate: float
    metrics: dict

    def __post_init__(self):
        if not self.bitrate > 0:
            raise ValueError(f"bitrate must be positive, got {self.bitrate}")
        if not all(np.isfinite(v) for v in self.metrics.values()):
            raise ValueError(f"non-finite metric in {self.metrics}")


@dataclass(frozen=True)
class RdCurve:
    label: str
    points: tuple
    adjusted: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.bitrate))
        object.__setattr__(self, "points", pts)
        rates = [p.bitrate for p in pts]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError(f"curve {self.label!r}: bitrates must be strictly increasing, got {rates}")

    @property
    def rates(self):
        return np.array([p.bitrate for p in self.points])

    def values(self, metric):
        return np.array([p.metrics[metric] for p in self.points])

    @classmethod
    def from_arrays(cls, label, rates, metric_arrays):
        pts = [RdPoint(float(r), {k: float(v[i]) for k, v in metric_arrays.items()})
               for i, r in enumerate(rates)]
        return cls(label, tuple(pts))


@dataclass(frozen=True)
class BdResult:
    bd_rate: float
    bd_task: float
    rate_range: tuple
    metric_range: tuple
    adjusted: bool
    valid: bool


def enforce_monotonic(curve, metric):
    """Lower each score to at most the next higher-rate score."""
    vals = curve.values(metric)
    out = vals.copy()
    for i in range(len(out) - 2, -1, -1):
        out[i] = min(out[i], out[i + 1])
    pts = tuple(RdPoint(p.bitrate, {**p.metrics, metric: float(v)}) for p, v in zip(curve.points, out))
    changed = bool(np.any(out != vals))
    adjusted = curve.adjusted | {metric} if changed else curve.adjusted
    return replace(curve, points=pts, adjusted=adjusted)


def _mean_gap(xa, ya, xb, yb, lo, hi):
    pa = np.polyfit(xa, ya, 3)
    pb = np.polyfit(xb, yb, 3)
    grid = np.linspace(lo, hi, SAMPLES)
    diff = np.polyval(pb, grid) - np.polyval(pa, grid)
    return np.trapezoid(diff, grid) / (hi - lo)


def bd_metric(anchor, test, metric, monotonic=True):
    """BD-rate (percent) and BD-task (metric units) of ``test`` against ``anchor``."""
    for c in (anchor, test):
        if len(c.points) < 4:
            raise ValueError(f"curve {c.label!r} needs >= 4 points, has {len(c.points)}")
    if monotonic:
        anchor, test = enforce_monotonic(anchor, metric), enforce_monotonic(test, metric)
    adjusted = metric in anchor.adjusted or metric in test.adjusted
    la, lt = np.log10(anchor.rates), np.log10(test.rates)
    ma, mt = anchor.values(metric), test.values(metric)
    r_lo, r_hi = max(la.min(), lt.min()), min(la.max(), lt.max())
    m_lo, m_hi = max(ma.min(), mt.min()), min(ma.max(), mt.max())
    bd_task = _mean_gap(la, ma, lt, mt, r_lo, r_hi) if r_hi > r_lo else float("nan")
    if m_hi > m_lo:
        bd_rate = (10 ** _mean_gap(ma, la, mt, lt, m_lo, m_hi) - 1) * 100
    else:
        bd_rate = float("nan")
    valid = bool(r_hi > r_lo and m_hi > m_lo)
    return BdResult(float(bd_rate), float(bd_task), (float(r_lo), float(r_hi)), (float(m_lo), float(m_hi)),
                    adjusted, valid)
