"""Turn an ultrametric contour map into a total partition of the image."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core.classes import NUM_CLASSES, UNKNOWN
from .errors import ShapeMismatch

DEFAULT_TAU_UCM = 0.2
_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class SegmentMap:
    ids: np.ndarray  # (H, W) int, 0..K-1

    @property
    def shape(self):
        return self.ids.shape

    @property
    def n_segments(self):
        return int(self.ids.max()) + 1 if self.ids.size else 0

    @property
    def counts(self):
        return np.bincount(self.ids.ravel(), minlength=self.n_segments)


def canonical_ids(ids):
    """Renumber so ids appear in raster-scan first-touch order."""
    _, first, inverse = np.unique(ids.ravel(), return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse].reshape(ids.shape).astype(np.int32)


def _neighbour_labels(lab):
    h, w = lab.shape
    pad = np.full((h + 2, w + 2), -1, dtype=lab.dtype)
    pad[1:-1, 1:-1] = lab
    return np.stack([pad[:-2, 1:-1], pad[2:, 1:-1], pad[1:-1, :-2], pad[1:-1, 2:]], axis=-1)


def absorb_boundaries(lab):
    """Assign every ``-1`` pixel to the adjacent segment with the most 4-neighbours (ties -> lowest id).

    Runs in synchronous waves so thick boundaries fill from their rims inwards,
    independent of scan order.
    """
    lab = lab.copy()
    while True:
        todo = lab < 0
        if not todo.any():
            return lab
        nb = _neighbour_labels(lab)[todo]  # (n, 4)
        known = nb >= 0
        reachable = known.any(axis=1)
        if not reachable.any():
            raise ValueError("boundary pixels not connected to any segment")
        votes = (nb[:, :, None] == nb[:, None, :]).sum(axis=2)
        votes = np.where(known, votes, -1)
        # max votes, then lowest id
        big = int(lab.max()) + 1
        key = np.where(known, votes * big - nb, np.iinfo(np.int64).min)
        choice = nb[np.arange(nb.shape[0]), np.argmax(key, axis=1)]
        rows, cols = np.nonzero(todo)
        lab[rows[reachable], cols[reachable]] = choice[reachable]


def extract_segments(ucm, tau_ucm=DEFAULT_TAU_UCM):
    """Segments of the UCM thresholded at ``tau_ucm``.

    Pixels with strength above ``tau_ucm`` are contour pixels; the
    4-connected components of the rest are the segments, and contour pixels
    are then absorbed into neighbouring segments so every pixel is covered.
    """
    ucm = np.asarray(ucm, dtype=np.float64)
    if ucm.ndim != 2:
        raise ShapeMismatch(f"UCM must be 2-D, got {ucm.shape}")
    if not 0.0 <= tau_ucm <= 1.0:
        raise ValueError(f"tau_ucm={tau_ucm} outside [0, 1]")
    boundary = ucm > tau_ucm
    if boundary.all():
        return SegmentMap(np.zeros(ucm.shape, dtype=np.int32))
    comp, _ = ndimage.label(~boundary, structure=_FOUR)
    lab = comp.astype(np.int64) - 1
    return SegmentMap(canonical_ids(absorb_boundaries(lab)))


def segment_histogram(seg, labels):
    """``(K, 13)`` counts of each class inside each segment; UNKNOWN pixels are skipped."""
    ids = seg.ids if isinstance(seg, SegmentMap) else np.asarray(seg)
    labels = np.asarray(labels)
    if ids.shape != labels.shape:
        raise ShapeMismatch(f"segments {ids.shape} vs labels {labels.shape}")
    k = int(ids.max()) + 1
    keep = labels != UNKNOWN
    flat = ids[keep].astype(np.int64) * NUM_CLASSES + labels[keep].astype(np.int64)
    return np.bincount(flat, minlength=k * NUM_CLASSES).reshape(k, NUM_CLASSES)
