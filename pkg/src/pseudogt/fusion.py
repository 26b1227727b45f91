"""Pseudo ground truth from depth-based predictions, CAMs and contour segments.

Step one votes the confidence-filtered depth predictions inside each
segment.  Step two lets a confident CAM proposal override that vote; among
several confident proposals the class with the smallest image-wide
response area wins, so small objects lying on large ones are kept.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .contours import SegmentMap, segment_histogram
from .core.classes import NUM_CLASSES, UNKNOWN, class_id
from .errors import EmptySegment, InvalidProfile, ShapeMismatch

GROUPS = ("unknown", "scene_bounds", "other")


@dataclass(frozen=True)
class ThresholdProfile:
    tau_adapted: float = 0.6
    tau_cam: float = 0.5
    # group -> (tau_p, tau_r)
    pairs: dict = field(
        default_factory=lambda: {
            "unknown": (0.6, 0.2),
            "scene_bounds": (0.7, 0.3),
            "other": (0.8, 0.4),
        }
    )

    def __post_init__(self):
        pairs = {g: tuple(float(v) for v in self.pairs[g]) for g in GROUPS if g in self.pairs}
        missing = set(GROUPS) - set(pairs)
        if missing:
            raise InvalidProfile(f"threshold pairs missing for groups {sorted(missing)}")
        object.__setattr__(self, "pairs", pairs)

    def validate(self, allow_unreachable=True):
        """Every threshold must lie in [0, 1].

        ``allow_unreachable`` admits (tau_p, tau_r) above 1, which switches
        the CAM override off entirely.
        """
        checks = {"tau_adapted": self.tau_adapted, "tau_cam": self.tau_cam}
        for g, (tp, tr) in self.pairs.items():
            checks[f"{g}.tau_p"] = tp
            checks[f"{g}.tau_r"] = tr
        for name, v in checks.items():
            upper = np.inf if allow_unreachable and "." in name else 1.0
            if not (0.0 <= v <= upper):
                raise InvalidProfile(f"{name}={v} outside [0, 1]")
        return self

    def pair_for(self, step1_label, groups):
        if step1_label == UNKNOWN:
            return self.pairs["unknown"]
        if step1_label in groups.scene_bounds:
            return self.pairs["scene_bounds"]
        return self.pairs["other"]

    def to_dict(self):
        return {
            "tau_adapted": self.tau_adapted,
            "tau_cam": self.tau_cam,
            "pairs": {g: list(p) for g, p in self.pairs.items()},
        }

    @classmethod
    def from_dict(cls, d):
        kwargs = {k: d[k] for k in ("tau_adapted", "tau_cam") if k in d}
        if "pairs" in d:
            pairs = dict(cls().pairs)
            pairs.update({g: tuple(v) for g, v in d["pairs"].items()})
            unknown = set(pairs) - set(GROUPS)
            if unknown:
                raise InvalidProfile(f"unknown threshold groups {sorted(unknown)}")
            kwargs["pairs"] = pairs
        return cls(**kwargs).validate()


@dataclass(frozen=True)
class CategoryGroups:
    scene_bounds: frozenset = frozenset(class_id(n) for n in ("ceil", "floor", "wall"))
    small: frozenset = frozenset(class_id(n) for n in ("books", "painting"))

    def __post_init__(self):
        sb, sm = frozenset(self.scene_bounds), frozenset(self.small)
        if sb & sm:
            raise InvalidProfile("scene-bound and small-object groups overlap")
        if any(not 0 <= c < NUM_CLASSES for c in sb | sm):
            raise InvalidProfile("group members must be valid class ids")
        object.__setattr__(self, "scene_bounds", sb)
        object.__setattr__(self, "small", sm)

    def to_dict(self):
        return {"scene_bounds": sorted(self.scene_bounds), "small": sorted(self.small)}

    @classmethod
    def from_dict(cls, d):
        def ids(v):
            return frozenset(x if isinstance(x, int) else class_id(x) for x in v)

        kwargs = {k: ids(d[k]) for k in ("scene_bounds", "small") if k in d}
        return cls(**kwargs)


def load_fusion_config(path):
    """Read ``{"thresholds": {...}, "groups": {...}}`` from a JSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    return ThresholdProfile.from_dict(doc.get("thresholds", {})), CategoryGroups.from_dict(doc.get("groups", {}))


def _ids(seg):
    return seg.ids if isinstance(seg, SegmentMap) else np.asarray(seg)


def softmax(logits, axis=0):
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def confidence_filter(logits, tau_adapted=0.6):
    """Argmax class where its softmax probability exceeds ``tau_adapted``, else UNKNOWN.

    ``logits`` is channel-first ``(13, H, W)``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3 or logits.shape[0] != NUM_CLASSES:
        raise ShapeMismatch(f"logits must be ({NUM_CLASSES}, H, W), got {logits.shape}")
    prob = softmax(logits, axis=0)
    best = prob.argmax(axis=0)
    conf = np.take_along_axis(prob, best[None], axis=0)[0]
    return np.where(conf > tau_adapted, best, UNKNOWN).astype(np.uint8)


def step1_vote(seg, filtered):
    """Per-segment majority class of the filtered labels; UNKNOWN when nothing survived the filter."""
    hist = segment_histogram(_ids(seg), filtered)
    vote = hist.argmax(axis=1).astype(np.uint8)
    vote[hist.sum(axis=1) == 0] = UNKNOWN
    return vote


def rasterize(seg, per_segment):
    return np.asarray(per_segment, dtype=np.uint8)[_ids(seg)]


def cam_area(cam, tau_cam):
    """Per-class count of pixels whose activation exceeds ``tau_cam``."""
    cam = np.asarray(cam)
    return (cam > tau_cam).reshape(cam.shape[0], -1).sum(axis=1)


def response_stats(segment_values, tau_cam):
    """Peak activation and the fraction of pixels above ``tau_cam`` within one segment."""
    v = np.asarray(segment_values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptySegment("response statistics need a non-empty segment")
    return float(v.max()), float(np.count_nonzero(v > tau_cam)) / v.size


def segment_cam_stats(ids, cam, tau_cam):
    """Per-segment CAM sums, peaks and response rates, each ``(K, C)``."""
    c = cam.shape[0]
    k = int(ids.max()) + 1
    flat_ids = ids.ravel()
    flat = cam.reshape(c, -1)
    counts = np.bincount(flat_ids, minlength=k).astype(np.float64)
    sums = np.stack([np.bincount(flat_ids, weights=flat[j], minlength=k) for j in range(c)], axis=1)
    above = np.stack([np.bincount(flat_ids, weights=(flat[j] > tau_cam), minlength=k) for j in range(c)], axis=1)
    peaks = np.full((k, c), -np.inf)
    for j in range(c):
        np.maximum.at(peaks[:, j], flat_ids, flat[j])
    return sums, peaks, above / counts[:, None]


def step2_decisions(seg, step1, cam, profile=None, groups=None):
    """Per-segment outcome of the second integration step."""
    profile = ThresholdProfile() if profile is None else profile
    groups = CategoryGroups() if groups is None else groups
    profile.validate()
    ids = _ids(seg)
    cam = np.asarray(cam, dtype=np.float64)
    step1 = np.asarray(step1)
    if cam.ndim != 3 or cam.shape[1:] != ids.shape:
        raise ShapeMismatch(f"CAM {cam.shape} does not cover segments {ids.shape}")
    k = int(ids.max()) + 1
    if step1.shape != (k,):
        raise ShapeMismatch(f"{step1.shape[0]} step-1 labels for {k} segments")
    areas = cam_area(cam, profile.tau_cam)
    sums, peaks, rates = segment_cam_stats(ids, cam, profile.tau_cam)
    small = sorted(groups.small)
    out = step1.astype(np.uint8).copy()
    for seg_id in range(k):
        proposals = sorted({int(np.argmax(sums[seg_id]))} | set(small))
        tau_p, tau_r = profile.pair_for(int(step1[seg_id]), groups)
        electable = [c for c in proposals if peaks[seg_id, c] > tau_p and rates[seg_id, c] > tau_r]
        if electable:
            # sorted ascending, so min() breaks area ties towards the lowest id
            out[seg_id] = min(electable, key=lambda c: areas[c])
    return out


def step2_integrate(seg, step1, cam, profile=None, groups=None):
    """Pseudo-label map after the second integration step."""
    return rasterize(seg, step2_decisions(seg, step1, cam, profile, groups))


def generate_pseudo_labels(logits, seg, cam, profile=None, groups=None):
    """Full stage: filter, step one, step two.  Returns ``(filtered, step1, pseudo)``."""
    profile = ThresholdProfile() if profile is None else profile
    filtered = confidence_filter(logits, profile.tau_adapted)
    step1 = step1_vote(seg, filtered)
    return filtered, step1, step2_integrate(seg, step1, cam, profile, groups)
