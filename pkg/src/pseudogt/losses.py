"""Class-balanced pixel-wise negative log-likelihood with an UNKNOWN mask."""

import json
from dataclasses import dataclass

import numpy as np

from .core.classes import NUM_CLASSES, UNKNOWN
from .errors import AllPixelsUnknown, BadDistribution, ShapeMismatch

ENET_C = 1.02


def class_balance_weights(freqs):
    """ENet-style weights ``1 / ln(1.02 + p_c)`` from class pixel frequencies."""
    p = np.asarray(freqs, dtype=np.float64)
    if p.ndim != 1 or np.any(~np.isfinite(p)) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise BadDistribution(f"frequencies must be nonnegative and sum to 1, got sum {p.sum()!r}")
    return 1.0 / np.log(ENET_C + p)


def label_frequencies(labels, n_classes=NUM_CLASSES):
    """Frequencies of each class among non-UNKNOWN pixels (e.g. pseudo labels)."""
    labels = np.asarray(labels).ravel()
    labels = labels[labels != UNKNOWN].astype(np.int64)
    if labels.size == 0:
        raise AllPixelsUnknown("no labeled pixel to count")
    return np.bincount(labels, minlength=n_classes) / labels.size


def save_weights(path, weights):
    with open(path, "w") as fh:
        json.dump([float(w) for w in weights], fh)
        fh.write("\n")


def load_weights(path):
    with open(path) as fh:
        w = np.asarray(json.load(fh), dtype=np.float64)
    if w.shape != (NUM_CLASSES,) or np.any(~(w > 0)) or not np.all(np.isfinite(w)):
        raise ValueError(f"{path}: expected {NUM_CLASSES} positive finite weights")
    return w


@dataclass(frozen=True)
class LossReport:
    loss: float
    pixel_count: int


def _check(logits, labels, weights):
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    if logits.ndim != 3 or logits.shape[1:] != labels.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs labels {labels.shape}")
    if weights.shape != (logits.shape[0],):
        raise ShapeMismatch(f"{weights.shape[0]} weights for {logits.shape[0]} classes")
    mask = labels != UNKNOWN
    n = int(mask.sum())
    if n == 0:
        raise AllPixelsUnknown("every pixel is UNKNOWN; the loss is undefined")
    return logits, labels, weights, mask, n


def log_softmax(logits, axis=0):
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def weighted_nll(logits, labels, weights):
    """Mean over labeled pixels of ``-w[y] * log softmax(logits)[y]``.

    ``logits`` is ``(C, H, W)``; UNKNOWN pixels contribute nothing.
    """
    logits, labels, weights, mask, n = _check(logits, labels, weights)
    y = labels[mask].astype(np.int64)
    logp = log_softmax(logits[:, mask], axis=0)
    picked = logp[y, np.arange(y.size)]
    return LossReport(float(-(weights[y] * picked).sum() / n), n)


def weighted_nll_grad(logits, labels, weights):
    """Gradient of :func:`weighted_nll` w.r.t. the logits, same shape as ``logits``."""
    logits, labels, weights, mask, n = _check(logits, labels, weights)
    y = labels[mask].astype(np.int64)
    prob = np.exp(log_softmax(logits[:, mask], axis=0))
    g = prob.copy()
    g[y, np.arange(y.size)] -= 1.0
    g *= weights[y] / n
    out = np.zeros_like(logits)
    out[:, mask] = g
    return out
