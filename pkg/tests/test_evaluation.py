import numpy as np
import pytest

from nnvvc.evaluation import (ALL_CONFIGS, ANCHOR, METRICS, RdCurve, RdPoint, bd_metric, box_iou,
                              complexity_rows, detect_shapes, enforce_monotonic, feature_fidelity,
                              format_complexity, map_score, psnr, read_rows, report_from_rows, run_experiment,
                              sequence_map)
from nnvvc.lic.ladder import NOMINAL_QPS
from nnvvc.training import SyntheticDatasetSpec, generate_synthetic
from tiny import tiny_models

RATES = np.array([0.05, 0.09, 0.16, 0.3, 0.55, 1.0])
PSNRS = np.array([27.0, 29.5, 31.6, 33.9, 35.7, 37.8])


def curve(label, rates=RATES, vals=PSNRS):
    return RdCurve.from_arrays(label, rates, {"psnr": vals})


class TestPsnr:
    def test_cases(self):
        a = np.zeros((3, 8, 8), np.uint8)
        assert psnr(a, a) == 100.0
        assert psnr(a, a + np.uint8(255)) == 0.0
        b = a.astype(int) + 1
        assert psnr(a, b) == pytest.approx(48.1308, abs=1e-4)
        with pytest.raises(ValueError):
            psnr(a, a[:2])


class TestFeatureFidelity:
    def test_identity_and_symmetry(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 256, (3, 32, 32), dtype=np.uint8)
        y = rng.integers(0, 256, (3, 32, 32), dtype=np.uint8)
        assert feature_fidelity(x, x) == pytest.approx(100.0)
        assert feature_fidelity(x, y) == pytest.approx(feature_fidelity(y, x), rel=1e-12)

    def test_decreases_with_noise(self):
        x = generate_synthetic(SyntheticDatasetSpec(frames=1, seed=1)).frames[0]
        rng = np.random.default_rng(1)
        noise = rng.normal(0, 1, x.shape)
        scores = [feature_fidelity(x, np.clip(x + a * noise, 0, 255).astype(np.uint8)) for a in (2, 5, 10, 20, 40)]
        assert all(b < a for a, b in zip(scores, scores[1:]))


class TestMap:
    GT = np.array([[2, 2, 10, 10], [30, 5, 8, 12]], float)

    def test_perfect(self):
        assert map_score((self.GT, np.array([2.0, 1.0])), self.GT) == 1.0

    def test_no_predictions(self):
        assert map_score((np.zeros((0, 4)), np.zeros(0)), self.GT) == 0.0

    def test_half_recall(self):
        assert map_score((self.GT[:1], np.array([1.0])), self.GT) == pytest.approx(0.5)

    def test_false_positive_ranked_first(self):
        pred = np.array([[50, 50, 5, 5], [2, 2, 10, 10], [30, 5, 8, 12]], float)
        # precision after each detection: 0, 1/2, 2/3; interpolated area = 0.5 * 2/3 + 0.5 * 2/3
        assert map_score((pred, np.array([3.0, 2.0, 1.0])), self.GT) == pytest.approx(2 / 3)

    def test_order_invariance(self):
        rng = np.random.default_rng(2)
        boxes = np.concatenate([self.GT + rng.normal(0, 1, self.GT.shape), rng.uniform(0, 40, (4, 4)) + [0, 0, 3, 3]])
        scores = np.array([5.0, 5.0, 5.0, 1.0, 2.0, 5.0])
        base = map_score((boxes, scores), self.GT)
        for _ in range(5):
            p = rng.permutation(len(boxes))
            assert map_score((boxes[p], scores[p]), self.GT) == base

    def test_gt_matched_once(self):
        pred = np.array([[2, 2, 10, 10], [2, 2, 10, 10]], float)
        assert map_score((pred, np.array([2.0, 1.0])), self.GT[:1]) == pytest.approx(1.0)
        assert map_score((pred[:1], np.array([2.0])), self.GT[:1]) == 1.0

    def test_iou(self):
        assert box_iou([[0, 0, 2, 2]], [[1, 0, 2, 2]])[0, 0] == pytest.approx(1 / 3)
        assert box_iou([[0, 0, 1, 1]], [[5, 5, 1, 1]])[0, 0] == 0.0

    def test_detector_on_clean_frames(self):
        s = generate_synthetic(SyntheticDatasetSpec(frames=3, seed=3, shapes=(3, 3)))
        boxes, scores = detect_shapes(s.frames[0])
        assert len(boxes) == len(s.boxes[0]) and np.all(scores > 0)
        assert sequence_map(s.frames, s.boxes) >= 0.9


class TestMonotonic:
    def test_clamp(self):
        c = enforce_monotonic(curve("a", RATES[:3], np.array([30.0, 29.0, 35.0])), "psnr")
        assert list(c.values("psnr")) == [29.0, 29.0, 35.0]
        assert "psnr" in c.adjusted

    def test_unchanged_and_idempotent(self):
        c = curve("a")
        assert enforce_monotonic(c, "psnr") == c
        bumpy = curve("b", vals=np.array([27.0, 31.0, 30.0, 34.0, 33.0, 36.0]))
        once = enforce_monotonic(bumpy, "psnr")
        assert enforce_monotonic(once, "psnr") == once
        assert np.all(np.diff(once.values("psnr")) >= 0)
        assert np.all(once.values("psnr") <= bumpy.values("psnr"))


def bd_oracle(anchor, test):
    """Exact polynomial antiderivatives instead of sampled trapezoids."""
    la, lt = np.log10(anchor.rates), np.log10(test.rates)
    ma, mt = anchor.values("psnr"), test.values("psnr")

    def gap(xa, ya, xb, yb, lo, hi):
        pa = np.polynomial.Polynomial.fit(xa, ya, 3).convert().integ()
        pb = np.polynomial.Polynomial.fit(xb, yb, 3).convert().integ()
        return ((pb(hi) - pb(lo)) - (pa(hi) - pa(lo))) / (hi - lo)

    lo, hi = max(la.min(), lt.min()), min(la.max(), lt.max())
    task = gap(la, ma, lt, mt, lo, hi)
    lo, hi = max(ma.min(), mt.min()), min(ma.max(), mt.max())
    rate = (10 ** gap(ma, la, mt, lt, lo, hi) - 1) * 100
    return rate, task


class TestBd:
    def test_identical(self):
        r = bd_metric(curve("a"), curve("b"), "psnr")
        assert r.bd_rate == 0.0 and r.bd_task == 0.0 and r.valid

    def test_half_rates(self):
        r = bd_metric(curve("a"), curve("b", RATES * 0.5), "psnr")
        assert r.bd_rate == pytest.approx(-50.0, abs=0.1)

    def test_plus_one(self):
        r = bd_metric(curve("a"), curve("b", vals=PSNRS + 1), "psnr")
        assert r.bd_task == pytest.approx(1.0, abs=0.01)

    def test_matches_exact_integration(self):
        test = curve("b", RATES * np.array([0.8, 0.85, 0.9, 0.8, 0.75, 0.7]), PSNRS + [0.3, 0.1, 0.4, 0.2, 0.5, 0.1])
        r = bd_metric(curve("a"), test, "psnr")
        rate, task = bd_oracle(curve("a"), test)
        assert r.bd_rate == pytest.approx(rate, abs=1e-4)
        assert r.bd_task == pytest.approx(task, abs=1e-6)

    def test_task_antisymmetry(self):
        a = curve("a")
        b = curve("b", RATES * 1.1, PSNRS + np.array([0.5, 0.2, 0.4, 0.1, 0.3, 0.2]))
        assert bd_metric(a, b, "psnr").bd_task == pytest.approx(-bd_metric(b, a, "psnr").bd_task, abs=1e-6)

    def test_no_overlap(self):
        r = bd_metric(curve("a"), curve("b", RATES * 100, PSNRS + 20), "psnr")
        assert not r.valid and np.isnan(r.bd_rate) and np.isnan(r.bd_task)

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            bd_metric(curve("a", RATES[:3], PSNRS[:3]), curve("b"), "psnr")

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            RdPoint(0.0, {"psnr": 30.0})
        with pytest.raises(ValueError):
            curve("a", np.array([0.1, 0.1, 0.2, 0.3, 0.4, 0.5]))


@pytest.fixture(scope="module")
def report():
    seq = generate_synthetic(SyntheticDatasetSpec(width=48, height=32, frames=3, seed=4))
    return run_experiment(tiny_models(), [seq], qps=NOMINAL_QPS, intra_period=2)


class TestExperiment:
    def test_matrix_shape(self, report):
        assert len(report.rows) == 5 * 6
        assert set(report.curves) == set(ALL_CONFIGS)
        assert {r["qp"] for r in report.rows} == set(NOMINAL_QPS)

    def test_anchor_self_zero(self, report):
        for m in METRICS:
            r = report.bd[(ANCHOR, m)]
            assert r.bd_task == 0.0 and (r.bd_rate == 0.0 or np.isnan(r.bd_rate))

    def test_ima_shares_the_rate(self, report):
        rates = {(r["config"], r["qp"]): r["bpp"] for r in report.rows}
        for q in NOMINAL_QPS:
            assert rates[("ima", q)] == rates[("no-adapters", q)]
            assert rates[("iha+ima", q)] == rates[("iha", q)]

    def test_csv_and_svg(self, report, tmp_path):
        p = tmp_path / "results.csv"
        report.write_csv(str(p))
        rows = read_rows(str(p))
        assert [r["config"] for r in rows] == [r["config"] for r in report.rows]
        again = report_from_rows(rows)
        assert again.bd[("iha", "psnr")].bd_task == pytest.approx(report.bd[("iha", "psnr")].bd_task, abs=1e-4)
        paths = report.write_svg(str(tmp_path / "rd_{metric}.svg"))
        assert len(paths) == 3 and all(open(x).read().lstrip().startswith("<?xml") for x in paths)


class TestComplexity:
    def test_rows(self):
        rows = complexity_rows()
        assert [r[0] for r in rows] == ["Intra encoding", "Intra decoding", "IHA", "IMA", "IMA - fallback mode"]
        assert all(k > 0 and p > 0 for _, k, p in rows)
        # fallback IMA shares the IHA structure
        assert rows[2][1:] == rows[4][1:]
        assert "kMACs/pixel" in format_complexity(rows)
