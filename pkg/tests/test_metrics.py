import json

import numpy as np
import pytest

from fianet.errors import EmptyEvaluation, ShapeMismatch
from fianet.metrics import (MetricsReport, PR_THRESHOLDS, aggregate, iou,
                            report_table)
from helpers import loop_iou


class TestIou:
    def test_identical_nonempty_masks(self):
        m = np.zeros((4, 4), dtype=np.uint8)
        m[1:3, 1:3] = 1
        assert iou(m, m) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.zeros((4, 4), dtype=np.uint8)
        a[0, 0] = 1
        b[3, 3] = 1
        assert iou(a, b) == 0.0

    def test_offset_blocks(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.zeros((4, 4), dtype=np.uint8)
        a[1:3, 0:2] = 1
        b[1:3, 1:3] = 1
        assert iou(a, b) == pytest.approx(1 / 3)

    def test_empty_vs_empty_and_empty_vs_nonempty(self):
        empty = np.zeros((3, 3), dtype=np.uint8)
        full = np.ones((3, 3), dtype=np.uint8)
        assert iou(empty, empty) == 1.0
        assert iou(empty, full) == 0.0

    def test_symmetry_and_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.integers(0, 2, size=(8, 8))
            b = rng.integers(0, 2, size=(8, 8))
            assert iou(a, b) == iou(b, a)
            assert iou(a, b) == loop_iou(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            iou(np.zeros((2, 2)), np.zeros((2, 3)))


def _mask(n, positives):
    m = np.zeros((n, n), dtype=np.uint8)
    for i, j in positives:
        m[i, j] = 1
    return m


class TestAggregate:
    def test_single_perfect_sample(self):
        m = _mask(4, [(0, 0), (1, 1)])
        report = aggregate([(m, m, "tree")])
        assert report.oIoU == 100.0
        assert report.mIoU == 100.0
        assert all(v == 100.0 for v in report.pr_at.values())
        assert report.per_category == {"tree": 100.0}
        assert report.n_samples == 1

    def test_equal_union_half_and_half(self):
        # Two samples with equal union size 2: IoUs {1.0, 0.0}.
        perfect = _mask(4, [(0, 0), (0, 1)])
        pred = _mask(4, [(2, 2)])
        gt = _mask(4, [(3, 3)])
        report = aggregate([(perfect, perfect, "a"), (pred, gt, "b")])
        assert report.mIoU == pytest.approx(50.0)
        assert report.oIoU == pytest.approx(50.0)
        assert report.pr_at[0.5] == pytest.approx(50.0)

    def test_large_object_bias(self):
        big = np.zeros((60, 60), dtype=np.uint8)
        big.flat[:1000] = 1  # perfect hit on union 1000
        small_pred = np.zeros((60, 60), dtype=np.uint8)
        small_gt = np.zeros((60, 60), dtype=np.uint8)
        small_pred.flat[2000:2005] = 1
        small_gt.flat[3000:3005] = 1  # disjoint, union 10
        report = aggregate([(big, big, "big"), (small_pred, small_gt, "small")])
        assert report.oIoU == pytest.approx(100.0 * 1000 / 1010, abs=0.1)
        assert report.mIoU == pytest.approx(50.0)

    def test_monotone_thresholds(self):
        rng = np.random.default_rng(1)
        samples = [
            (rng.integers(0, 2, (8, 8)), rng.integers(0, 2, (8, 8)), "x")
            for _ in range(30)
        ]
        report = aggregate(samples)
        values = [report.pr_at[t] for t in PR_THRESHOLDS]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_strictness_configurable(self):
        pred = _mask(4, [(0, 0)])
        gt1 = _mask(4, [(0, 0), (0, 1)])  # IoU exactly 0.5
        strict = aggregate([(pred, gt1, "x")])
        lax = aggregate([(pred, gt1, "x")], strict_thresholds=False)
        assert strict.pr_at[0.5] == 0.0
        assert lax.pr_at[0.5] == 100.0

    def test_oiou_equals_miou_on_equal_unions(self):
        a = _mask(4, [(0, 0), (0, 1)])
        b = _mask(4, [(0, 1), (0, 2)])
        report = aggregate([(a, b, "x"), (a, b, "y")])
        assert report.oIoU == pytest.approx(report.mIoU)

    def test_empty_evaluation(self):
        with pytest.raises(EmptyEvaluation):
            aggregate([])


GOLDEN_REPORT = MetricsReport(
    oIoU=78.32, mIoU=68.67,
    pr_at={0.5: 84.09, 0.6: 77.05, 0.7: 61.86, 0.8: 33.41, 0.9: 7.10},
    per_category={"road": 74.13, "van": 61.06},
    n_samples=1817,
)

GOLDEN_TABLE = (
    " Pr@0.5   Pr@0.6   Pr@0.7   Pr@0.8   Pr@0.9     oIoU     mIoU\n"
    "  84.09    77.05    61.86    33.41     7.10    78.32    68.67\n"
    "\n"
    "category                    mIoU\n"
    "road                       74.13\n"
    "van                        61.06\n"
)


class TestReportTable:
    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "report.json"
        report_table(GOLDEN_REPORT, json_path=path)
        loaded = MetricsReport.from_dict(json.loads(path.read_text()))
        assert loaded == GOLDEN_REPORT

    def test_golden_table_layout(self):
        assert report_table(GOLDEN_REPORT) == GOLDEN_TABLE

    def test_empty_per_category_section_omitted(self):
        report = MetricsReport(oIoU=50.0, mIoU=50.0,
                               pr_at={t: 0.0 for t in PR_THRESHOLDS},
                               n_samples=2)
        text = report_table(report)
        assert "category" not in text
        assert len(text.splitlines()) == 2
