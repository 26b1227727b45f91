"""Independent reference implementations used by the unit and acceptance tests.

Written as plain loops over pixels and classes, sharing no code with the
package beyond constants.
"""

import math

import numpy as np

from pseudogt.core.classes import NUM_CLASSES, UNKNOWN

SCENE_BOUNDS = {2, 4, 11}  # ceil, floor, wall
SMALL = {1, 7}  # books, painting


def second_step_reference(seg, step1, cam, tau_cam, pairs, scene_bounds=SCENE_BOUNDS, small=SMALL):
    """Second integration step transcribed statement by statement.

    ``seg`` is an (H, W) id map, ``step1`` one label per segment, ``cam``
    a (C, H, W) volume and ``pairs`` maps "unknown"/"scene_bounds"/"other"
    to (tau_p, tau_r).
    """
    n_cls, h, w = cam.shape
    pixels = [(i, j) for i in range(h) for j in range(w)]
    area = {}
    for c in range(n_cls):
        area[c] = sum(1 for i, j in pixels if cam[c, i, j] > tau_cam)
    k_count = max(int(seg[i, j]) for i, j in pixels) + 1
    pseudo = np.zeros((h, w), dtype=int)
    for k in range(k_count):
        members = [(i, j) for i, j in pixels if seg[i, j] == k]
        best_c, best_sum = None, None
        for c in range(n_cls):
            s = sum(cam[c, i, j] for i, j in members)
            if best_sum is None or s > best_sum:
                best_c, best_sum = c, s
        proposals = {best_c} | set(small)
        electable = set()
        for c in sorted(proposals):
            p = max(cam[c, i, j] for i, j in members)
            r = sum(1 for i, j in members if cam[c, i, j] > tau_cam) / len(members)
            if step1[k] == UNKNOWN:
                tau_p, tau_r = pairs["unknown"]
            elif step1[k] in scene_bounds:
                tau_p, tau_r = pairs["scene_bounds"]
            else:
                tau_p, tau_r = pairs["other"]
            if p > tau_p and r > tau_r:
                electable.add(c)
        if not electable:
            label = step1[k]
        else:
            label = None
            for c in sorted(electable):
                if label is None or area[c] < area[label]:
                    label = c
        for i, j in members:
            pseudo[i, j] = label
    return pseudo


def random_fusion_instance(r):
    """Random segments, step-1 labels, CAM and thresholds; CAM values on a coarse grid to provoke ties."""
    h, w = int(r.integers(2, 17)), int(r.integers(2, 17))
    k = int(r.integers(1, min(5, h * w) + 1))
    seg = r.integers(0, k, (h, w))
    seg.ravel()[r.permutation(h * w)[:k]] = np.arange(k)
    step1 = np.array([UNKNOWN if r.random() < 0.3 else int(r.integers(NUM_CLASSES)) for _ in range(k)], dtype=np.uint8)
    cam = np.round(r.uniform(0, 1, (NUM_CLASSES, h, w)) * 10) / 10
    tau_cam = float(r.uniform(0.2, 0.8))
    pairs = {g: (float(r.uniform(0, 1)), float(r.uniform(0, 0.7))) for g in ("unknown", "scene_bounds", "other")}
    return seg, step1, cam, tau_cam, pairs


def confusion_counts(pred, gt, n=NUM_CLASSES):
    counts = [[0] * n for _ in range(n)]
    abstained = [0] * n
    for p, g in zip(np.ravel(pred), np.ravel(gt)):
        if g == UNKNOWN:
            continue
        if p == UNKNOWN:
            abstained[g] += 1
        else:
            counts[g][p] += 1
    return counts, abstained


def metric_values(counts, abstained, exclude=()):
    """Per-class IoU, mIoU over present classes and global accuracy, by hand."""
    n = len(counts)
    iou = []
    for c in range(n):
        tp = counts[c][c]
        fn = sum(counts[c]) - tp + abstained[c]
        fp = sum(counts[g][c] for g in range(n)) - tp
        denom = tp + fn + fp
        iou.append(float("nan") if denom == 0 else tp / denom)
    kept = [v for c, v in enumerate(iou) if c not in exclude and not math.isnan(v)]
    # exclusion only affects the mean
    total = sum(sum(counts[g]) + abstained[g] for g in range(n))
    correct = sum(counts[g][g] for g in range(n))
    miou = sum(kept) / len(kept) if kept else float("nan")
    return iou, miou, (correct / total if total else float("nan"))
