"""Confusion matrices, IoU/mIoU/GA, cover ratios and UCM refinement."""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .contours import SegmentMap, segment_histogram
from .core.classes import CLASS_NAMES, NUM_CLASSES, UNKNOWN, class_id
from .errors import EmptyMask, EmptyMatrix, MissingCoverRatio, PerClassRequiresGt, ShapeMismatch


def _class_set(classes):
    return frozenset(c if isinstance(c, (int, np.integer)) else class_id(c) for c in (classes or ()))


@dataclass
class ConfusionMatrix:
    """Rows are ground truth, columns prediction.

    ``abstained[c]`` counts gt-class-``c`` pixels predicted UNKNOWN; they are
    errors for every metric.  ``ignored`` counts pixels outside the evaluation.
    """

    counts: np.ndarray = field(default_factory=lambda: np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64))
    abstained: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES, dtype=np.int64))
    ignored: int = 0

    @property
    def total(self):
        return int(self.counts.sum() + self.abstained.sum())

    def __add__(self, other):
        return ConfusionMatrix(self.counts + other.counts, self.abstained + other.abstained, self.ignored + other.ignored)


def _pair(pred, gt):
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def confusion(pred, gt, ignore=(), where=None):
    """Accumulate a confusion matrix over pixels selected by ``where`` (default: all)."""
    pred, gt = _pair(pred, gt)
    ignore = _class_set(ignore)
    sel = np.ones(gt.shape, dtype=bool) if where is None else np.asarray(where, dtype=bool)
    evaluated = sel & (gt != UNKNOWN)
    for c in ignore:
        evaluated &= gt != c
    g = gt[evaluated].astype(np.int64)
    p = pred[evaluated].astype(np.int64)
    abst = p == UNKNOWN
    counts = np.bincount(g[~abst] * NUM_CLASSES + p[~abst], minlength=NUM_CLASSES**2)
    return ConfusionMatrix(
        counts.reshape(NUM_CLASSES, NUM_CLASSES),
        np.bincount(g[abst], minlength=NUM_CLASSES),
        int(sel.sum() - evaluated.sum()),
    )


@dataclass
class MetricReport:
    iou: np.ndarray  # NaN for absent classes
    miou: float
    ga: float
    excluded: tuple = ()
    cover_global: float = None
    cover_per_class: np.ndarray = None
    effective_ga: float = None
    effective_miou: float = None

    @property
    def included(self):
        """Classes entering the mean: present and not excluded."""
        return [c for c in range(NUM_CLASSES) if c not in self.excluded and not math.isnan(self.iou[c])]


def metrics(cm, exclude=()):
    """IoU per class, mIoU over present non-excluded classes, and global accuracy."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no evaluated pixel")
    tp = np.diag(cm.counts).astype(np.float64)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp + cm.abstained
    union = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, tp / union, np.nan)
    excluded = tuple(sorted(_class_set(exclude)))
    keep = [c for c in range(NUM_CLASSES) if c not in excluded and union[c] > 0]
    miou = float(np.mean(iou[keep])) if keep else float("nan")
    return MetricReport(iou, miou, float(tp.sum() / cm.total), excluded)


@dataclass(frozen=True)
class CoverRatio:
    global_ratio: float
    per_class: np.ndarray = None  # NaN where gt has no pixel of the class


def cover_ratio(pseudo, gt=None, per_class=False):
    """Fraction of pixels carrying a label, globally and (given gt) per gt class."""
    pseudo = np.asarray(pseudo)
    covered = pseudo != UNKNOWN
    if per_class and gt is None:
        raise PerClassRequiresGt("per-class cover ratios need a ground-truth map")
    per = None
    if gt is not None:
        _, gt = _pair(pseudo, gt)
        valid = gt != UNKNOWN
        g = gt[valid].astype(np.int64)
        tot = np.bincount(g, minlength=NUM_CLASSES).astype(np.float64)
        hit = np.bincount(g, weights=covered[valid], minlength=NUM_CLASSES)
        with np.errstate(invalid="ignore", divide="ignore"):
            per = np.where(tot > 0, hit / tot, np.nan)
    return CoverRatio(float(covered.mean()), per)


def with_cover(report, cover):
    return replace(report, cover_global=cover.global_ratio, cover_per_class=cover.per_class)


def effective_metrics(report):
    """Accuracy scaled by coverage: GA x global cover, and mean of IoU_c x cover_c."""
    if report.cover_global is None or report.cover_per_class is None:
        raise MissingCoverRatio("report carries no cover ratios")
    eff_ga = report.ga * report.cover_global
    keep = report.included
    # a gt-absent class in the mean has IoU 0, so its undefined cover is irrelevant
    cov = np.nan_to_num(report.cover_per_class, nan=1.0)
    eff_miou = float(np.mean(report.iou[keep] * cov[keep])) if keep else float("nan")
    return eff_ga, eff_miou


def restricted_metrics(pred, gt, mask, exclude=()):
    """Metrics over the pixels where ``mask`` (a pseudo-label map) is not UNKNOWN."""
    pred, gt = _pair(pred, gt)
    mask = np.asarray(mask)
    if mask.shape != gt.shape:
        raise ShapeMismatch(f"mask {mask.shape} vs ground truth {gt.shape}")
    sel = mask != UNKNOWN
    if not sel.any():
        raise EmptyMask("mask labels no pixel")
    return metrics(confusion(pred, gt, exclude, where=sel), exclude)


@dataclass
class CoverageSummary:
    """One row of the pseudo-label comparison: plain, restricted and effective metrics.

    ``ga``/``miou`` are measured over the prediction's own labeled pixels and
    the effective values scale them by coverage.
    """

    cover: float
    ga: float
    ga_at_pseudo: float
    effective_ga: float
    miou: float
    miou_at_pseudo: float
    effective_miou: float

    def as_percent(self):
        return {k: (None if v is None or math.isnan(v) else round(100.0 * v, 2)) for k, v in self.__dict__.items()}


@dataclass
class CoverageStats:
    """Mergeable counts behind :class:`CoverageSummary`, for batch evaluation."""

    everywhere: ConfusionMatrix
    labeled: ConfusionMatrix
    at_pseudo: ConfusionMatrix
    covered: int
    pixels: int
    class_hit: np.ndarray
    class_total: np.ndarray

    def __add__(self, other):
        return CoverageStats(
            self.everywhere + other.everywhere,
            self.labeled + other.labeled,
            self.at_pseudo + other.at_pseudo,
            self.covered + other.covered,
            self.pixels + other.pixels,
            self.class_hit + other.class_hit,
            self.class_total + other.class_total,
        )

    def cover(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            per = np.where(self.class_total > 0, self.class_hit / self.class_total, np.nan)
        return CoverRatio(self.covered / self.pixels, per)

    def reports(self, exclude=()):
        """``(everywhere, labeled, at_pseudo)`` reports; ``labeled`` carries cover and effective values."""
        cover = self.cover()
        every = with_cover(metrics(self.everywhere, exclude), cover)
        if self.labeled.total:
            labeled = with_cover(metrics(self.labeled, exclude), cover)
            labeled.effective_ga, labeled.effective_miou = effective_metrics(labeled)
        else:
            # nothing labeled: accuracy is undefined, coverage-scaled accuracy is zero
            nan = float("nan")
            labeled = with_cover(MetricReport(np.full(NUM_CLASSES, nan), nan, nan, tuple(sorted(_class_set(exclude)))), cover)
            labeled.effective_ga = labeled.effective_miou = 0.0
        at = metrics(self.at_pseudo, exclude) if self.at_pseudo.total else None
        return every, labeled, at

    def summary(self, exclude=()):
        _, own, at = self.reports(exclude)
        nan = float("nan")
        return CoverageSummary(
            own.cover_global,
            own.ga,
            at.ga if at else nan,
            own.effective_ga,
            own.miou,
            at.miou if at else nan,
            own.effective_miou,
        )


def coverage_stats(pred, gt, pseudo=None, exclude=()):
    pred, gt = _pair(pred, gt)
    pseudo = pred if pseudo is None else np.asarray(pseudo)
    cover = pred != UNKNOWN
    valid = gt != UNKNOWN
    g = gt[valid].astype(np.int64)
    return CoverageStats(
        confusion(pred, gt, exclude),
        confusion(pred, gt, exclude, where=cover),
        confusion(pred, gt, exclude, where=pseudo != UNKNOWN),
        int(cover.sum()),
        int(cover.size),
        np.bincount(g, weights=cover[valid], minlength=NUM_CLASSES),
        np.bincount(g, minlength=NUM_CLASSES).astype(np.float64),
    )


def coverage_summary(pred, gt, pseudo=None, exclude=()):
    """Cover ratio with plain, @pseudo-restricted and effective GA/mIoU for one prediction map."""
    return coverage_stats(pred, gt, pseudo, exclude).summary(exclude)


def ucm_refine(pred, seg):
    """Relabel every segment with its majority predicted class (UNKNOWN only if all pixels are)."""
    ids = seg.ids if isinstance(seg, SegmentMap) else np.asarray(seg)
    pred = np.asarray(pred)
    if ids.shape != pred.shape:
        raise ShapeMismatch(f"segments {ids.shape} vs prediction {pred.shape}")
    hist = segment_histogram(ids, pred)
    vote = hist.argmax(axis=1).astype(np.uint8)
    vote[hist.sum(axis=1) == 0] = UNKNOWN
    return vote[ids]


def _num(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def report_to_dict(report):
    d = {
        "classes": list(CLASS_NAMES),
        "iou": [_num(v) for v in report.iou],
        "miou": _num(report.miou),
        "ga": _num(report.ga),
        "excluded": [CLASS_NAMES[c] for c in report.excluded],
    }
    if report.cover_global is not None:
        d["cover_global"] = _num(report.cover_global)
    if report.cover_per_class is not None:
        d["cover_per_class"] = [_num(v) for v in report.cover_per_class]
    if report.effective_ga is not None:
        d["effective_ga"] = _num(report.effective_ga)
        d["effective_miou"] = _num(report.effective_miou)
    return d


def report_to_json(report, **extra):
    d = report_to_dict(report)
    d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


_SHORT = ("bed", "books", "ceil", "chair", "floor", "furn.", "objs.", "paint", "sofa", "table", "tv", "wall", "window")


def format_table(rows):
    """Aligned text table, one row per ``(name, report)``: per-class IoU (%) then mIoU."""
    header = ["", *_SHORT, "mIoU"]
    body = []
    for name, rep in rows:
        cells = ["-" if math.isnan(v) else f"{100 * v:.2f}" for v in rep.iou]
        cells.append("-" if math.isnan(rep.miou) else f"{100 * rep.miou:.2f}")
        body.append([name, *cells])
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in [header, *body]]
    return "\n".join(lines) + "\n"


def format_csv(report):
    lines = ["class,iou,cover"]
    for c, name in enumerate(CLASS_NAMES):
        iou = "" if math.isnan(report.iou[c]) else repr(float(report.iou[c]))
        cov = ""
        if report.cover_per_class is not None and not math.isnan(report.cover_per_class[c]):
            cov = repr(float(report.cover_per_class[c]))
        lines.append(f"{name},{iou},{cov}")
    return "\n".join(lines) + "\n"
