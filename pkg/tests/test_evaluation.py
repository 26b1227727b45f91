import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import confusion_counts, metric_values
from pseudogt.core.classes import NUM_CLASSES, UNKNOWN, class_id
from pseudogt.errors import EmptyMask, EmptyMatrix, MissingCoverRatio, PerClassRequiresGt, ShapeMismatch
from pseudogt.evaluation import (
    ConfusionMatrix,
    MetricReport,
    confusion,
    coverage_stats,
    coverage_summary,
    cover_ratio,
    effective_metrics,
    format_csv,
    format_table,
    metrics,
    report_to_json,
    restricted_metrics,
    ucm_refine,
    with_cover,
)

WALL, PAINT, WINDOW = class_id("wall"), class_id("painting"), class_id("window")


def random_labels(r, shape, unknown_rate=0.15, n=NUM_CLASSES):
    x = r.integers(0, n, shape).astype(np.uint8)
    x[r.random(shape) < unknown_rate] = UNKNOWN
    return x


def cm_from(counts):
    m = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    k = len(counts)
    m[:k, :k] = counts
    return ConfusionMatrix(m)


class TestConfusion:
    def test_diagonal(self, rng):
        gt = rng.integers(0, NUM_CLASSES, (6, 6)).astype(np.uint8)
        cm = confusion(gt, gt)
        assert np.array_equal(cm.counts, np.diag(np.bincount(gt.ravel(), minlength=NUM_CLASSES)))

    def test_all_unknown_gt(self, rng):
        cm = confusion(rng.integers(0, 13, (3, 3)), np.full((3, 3), UNKNOWN))
        assert cm.total == 0 and cm.ignored == 9

    def test_counting_oracle(self, rng):
        pred, gt = random_labels(rng, (8, 8)), random_labels(rng, (8, 8))
        cm = confusion(pred, gt)
        counts, abstained = confusion_counts(pred, gt)
        assert cm.counts.tolist() == counts and cm.abstained.tolist() == abstained
        assert cm.total + cm.ignored == 64

    def test_ignore_classes(self):
        gt = np.array([[WALL, WINDOW]])
        cm = confusion(np.array([[WALL, WALL]]), gt, ignore=["window"])
        assert cm.total == 1 and cm.ignored == 1

    def test_shape(self):
        with pytest.raises(ShapeMismatch):
            confusion(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_merge(self, rng):
        a = [random_labels(rng, (5, 5)) for _ in range(4)]
        whole = confusion(np.concatenate(a[:2]), np.concatenate(a[2:]))
        merged = confusion(a[0], a[2]) + confusion(a[1], a[3])
        assert np.array_equal(whole.counts, merged.counts) and whole.ignored == merged.ignored


class TestMetrics:
    def test_perfect(self, rng):
        gt = rng.integers(0, NUM_CLASSES, (9, 9))
        rep = metrics(confusion(gt, gt))
        present = np.unique(gt)
        assert np.all(rep.iou[present] == 1.0) and rep.ga == 1.0 and rep.miou == 1.0

    def test_two_class_example(self):
        rep = metrics(cm_from([[3, 1], [1, 3]]))
        assert rep.iou[0] == pytest.approx(0.6) and rep.iou[1] == pytest.approx(0.6)
        assert rep.ga == pytest.approx(0.75) and rep.miou == pytest.approx(0.6)
        assert all(math.isnan(v) for v in rep.iou[2:])

    def test_exclusion_only_changes_mean(self, rng):
        pred, gt = random_labels(rng, (10, 10)), random_labels(rng, (10, 10))
        full, excl = metrics(confusion(pred, gt)), metrics(confusion(pred, gt), exclude=["window"])
        assert np.array_equal(full.iou, excl.iou, equal_nan=True)
        assert full.ga == excl.ga
        assert excl.miou == pytest.approx(np.nanmean(np.delete(full.iou, WINDOW)))
        assert WINDOW not in excl.included

    def test_abstention_is_wrong(self):
        rep = metrics(confusion(np.array([[WALL, UNKNOWN]]), np.array([[WALL, WALL]])))
        assert rep.ga == 0.5 and rep.iou[WALL] == 0.5

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            metrics(ConfusionMatrix())

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sets(st.integers(0, NUM_CLASSES - 1), max_size=3))
    def test_oracle_and_ranges(self, seed, exclude):
        r = np.random.default_rng(seed)
        pred, gt = random_labels(r, (7, 9), n=5), random_labels(r, (7, 9), n=5)
        gt[0, 0] = 0
        rep = metrics(confusion(pred, gt), exclude)
        iou, miou, ga = metric_values(*confusion_counts(pred, gt), exclude=exclude)
        assert np.allclose(rep.iou, iou, equal_nan=True, atol=1e-12, rtol=0)
        assert rep.ga == pytest.approx(ga, abs=1e-12)
        if math.isnan(miou):
            assert math.isnan(rep.miou)
        else:
            assert rep.miou == pytest.approx(miou, abs=1e-12)
        assert 0 <= rep.ga <= 1 and np.all((rep.iou[~np.isnan(rep.iou)] >= 0) & (rep.iou[~np.isnan(rep.iou)] <= 1))


class TestCover:
    def test_examples(self):
        assert cover_ratio(np.zeros((2, 2), np.uint8)).global_ratio == 1.0
        assert cover_ratio(np.array([[0, UNKNOWN]])).global_ratio == 0.5

    def test_per_class(self):
        pseudo = np.array([[WALL, UNKNOWN, PAINT, PAINT]])
        gt = np.array([[WALL, WALL, PAINT, UNKNOWN]])
        cov = cover_ratio(pseudo, gt, per_class=True)
        assert cov.per_class[WALL] == 0.5 and cov.per_class[PAINT] == 1.0
        assert math.isnan(cov.per_class[0])
        with pytest.raises(PerClassRequiresGt):
            cover_ratio(pseudo, per_class=True)

    def test_effective_ga_from_published_row(self):
        rep = MetricReport(np.full(NUM_CLASSES, np.nan), float("nan"), 0.8086, cover_global=0.7277, cover_per_class=np.ones(NUM_CLASSES))
        eff_ga, _ = effective_metrics(rep)
        assert 100 * eff_ga == pytest.approx(58.84, abs=0.01)

    def test_full_cover_is_identity(self, rng):
        pred, gt = random_labels(rng, (8, 8), 0.0), random_labels(rng, (8, 8), 0.0)
        rep = with_cover(metrics(confusion(pred, gt)), cover_ratio(pred, gt))
        eff_ga, eff_miou = effective_metrics(rep)
        assert eff_ga == rep.ga and eff_miou == pytest.approx(rep.miou, abs=1e-15)

    def test_multiplication_oracle(self, rng):
        iou = rng.uniform(0, 1, NUM_CLASSES)
        cov = rng.uniform(0, 1, NUM_CLASSES)
        rep = MetricReport(iou, float(iou.mean()), 0.7, cover_global=0.4, cover_per_class=cov)
        eff_ga, eff_miou = effective_metrics(rep)
        assert abs(eff_ga - 0.28) < 1e-12
        assert abs(eff_miou - sum(iou[c] * cov[c] for c in range(NUM_CLASSES)) / NUM_CLASSES) < 1e-12
        assert eff_ga <= rep.ga and eff_miou <= rep.miou

    def test_missing_cover(self):
        with pytest.raises(MissingCoverRatio):
            effective_metrics(MetricReport(np.zeros(NUM_CLASSES), 0.0, 0.0))


class TestRestricted:
    def test_full_mask_equals_unrestricted(self, rng):
        pred, gt = random_labels(rng, (8, 8)), random_labels(rng, (8, 8))
        a = restricted_metrics(pred, gt, np.zeros((8, 8), np.uint8))
        b = metrics(confusion(pred, gt))
        assert np.array_equal(a.iou, b.iou, equal_nan=True) and a.ga == b.ga

    def test_masked_oracle(self, rng):
        pred, gt, mask = (random_labels(rng, (8, 8), 0.3) for _ in range(3))
        rep = restricted_metrics(pred, gt, mask)
        sel = mask != UNKNOWN
        iou, miou, ga = metric_values(*confusion_counts(pred[sel], gt[sel]))
        assert np.allclose(rep.iou, iou, equal_nan=True) and rep.ga == pytest.approx(ga)

    def test_pseudo_on_itself(self, rng):
        pseudo, gt = random_labels(rng, (12, 12), 0.3), random_labels(rng, (12, 12), 0.05)
        s = coverage_summary(pseudo, gt)
        assert s.ga == s.ga_at_pseudo and s.miou == s.miou_at_pseudo
        assert s.effective_ga == pytest.approx(s.ga * s.cover)

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            restricted_metrics(np.zeros((2, 2)), np.zeros((2, 2)), np.full((2, 2), UNKNOWN))

    def test_stats_merge(self, rng):
        maps = [(random_labels(rng, (6, 6), 0.3), random_labels(rng, (6, 6))) for _ in range(3)]
        merged = coverage_stats(*maps[0]) + coverage_stats(*maps[1]) + coverage_stats(*maps[2])
        whole = coverage_stats(np.concatenate([m[0] for m in maps]), np.concatenate([m[1] for m in maps]))
        assert merged.summary() == whole.summary()


class TestRefine:
    def test_segment_constant_fixed_point(self):
        seg = np.array([[0, 0, 1], [0, 1, 1]])
        pred = np.array([[3, 3, 5], [3, 5, 5]], np.uint8)
        assert np.array_equal(ucm_refine(pred, seg), pred)

    def test_majority(self):
        seg = np.zeros((2, 5), int)
        pred = np.array([[WALL] * 3 + [PAINT] * 2, [WALL] * 3 + [PAINT] * 2], np.uint8)
        assert np.all(ucm_refine(pred, seg) == WALL)

    def test_unknown_segment_stays(self):
        seg = np.array([[0, 1]])
        assert ucm_refine(np.array([[UNKNOWN, 2]], np.uint8), seg).tolist() == [[UNKNOWN, 2]]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_idempotent_and_no_new_classes(self, seed):
        r = np.random.default_rng(seed)
        seg = r.integers(0, 5, (8, 8))
        seg[0, :5] = np.arange(5)
        pred = random_labels(r, (8, 8), 0.3)
        once = ucm_refine(pred, seg)
        assert np.array_equal(ucm_refine(once, seg), once)
        for k in range(5):
            assert set(once[seg == k].tolist()) <= set(pred[seg == k].tolist())


class TestFormats:
    def test_json_and_csv(self, rng):
        pred, gt = random_labels(rng, (8, 8)), random_labels(rng, (8, 8), 0.0)
        rep = with_cover(metrics(confusion(pred, gt)), cover_ratio(pred, gt))
        rep.effective_ga, rep.effective_miou = effective_metrics(rep)
        doc = json.loads(report_to_json(rep, name="x"))
        assert doc["name"] == "x" and len(doc["iou"]) == NUM_CLASSES and doc["ga"] == rep.ga
        lines = format_csv(rep).splitlines()
        assert lines[0] == "class,iou,cover" and len(lines) == NUM_CLASSES + 1

    def test_table_alignment(self):
        rep = metrics(cm_from([[3, 1], [1, 3]]))
        lines = format_table([("a", rep), ("longer", rep)]).splitlines()
        assert len(lines) == 3 and len({len(line) for line in lines}) == 1
        assert "60.00" in lines[1] and lines[0].rstrip().endswith("mIoU")


def test_abstaining_everywhere_reports_zero_effective():
    gt = np.array([[WALL, PAINT]], np.uint8)
    s = coverage_summary(np.full((1, 2), UNKNOWN, np.uint8), gt)
    assert s.cover == 0.0 and math.isnan(s.ga) and s.effective_ga == 0.0 and s.effective_miou == 0.0
