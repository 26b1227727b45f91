"""Classifier head (2x2 max pool -> global average pool -> linear) and class activation maps.

Arrays are channel-first: features ``(d, h, w)``, CAM volumes ``(C, H, W)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class HeadWeights:
    weight: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.zeros(w.shape[0]) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ShapeMismatch(f"head weight {w.shape} and bias {b.shape} disagree")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("head weights must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_classes(self):
        return self.weight.shape[0]


def _features(f, head):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ShapeMismatch(f"feature volume must be (d, h, w), got {f.shape}")
    if f.shape[0] != head.weight.shape[1]:
        raise ShapeMismatch(f"{f.shape[0]} feature channels but head expects {head.weight.shape[1]}")
    if f.shape[1] < 2 or f.shape[2] < 2:
        raise ShapeMismatch(f"feature grid {f.shape[1:]} too small for 2x2 pooling")
    return f


def max_pool2x2(f):
    """Stride-2 max pooling; a trailing odd row/column is dropped."""
    d, h, w = f.shape
    h2, w2 = h // 2, w // 2
    return f[:, : 2 * h2, : 2 * w2].reshape(d, h2, 2, w2, 2).max(axis=(2, 4))


def head_forward(f, head):
    """Class scores ``W . GAP(maxpool(f)) + b``."""
    f = _features(f, head)
    pooled = max_pool2x2(f).mean(axis=(1, 2))
    return head.weight @ pooled + head.bias


def _bilinear_axis(n_in, n_out):
    """Half-pixel-centre source coordinates: lower index, upper index, upper weight."""
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def upsample_bilinear(maps, size):
    """Resize ``(C, h, w)`` maps to ``(C, H, W)`` without corner alignment."""
    _, h, w = maps.shape
    out_h, out_w = size
    y0, y1, wy = _bilinear_axis(h, out_h)
    x0, x1, wx = _bilinear_axis(w, out_w)
    top = maps[:, y0, :] * (1.0 - wy)[None, :, None] + maps[:, y1, :] * wy[None, :, None]
    return top[:, :, x0] * (1.0 - wx) + top[:, :, x1] * wx


def normalize_per_class(cams, constant=None):
    """Min-max each channel to [0, 1]; constant channels become all zeros.

    ``constant`` optionally flags channels known to be constant, which
    interpolation round-off could otherwise turn into noise.
    """
    lo = cams.min(axis=(1, 2), keepdims=True)
    hi = cams.max(axis=(1, 2), keepdims=True)
    span = hi - lo
    flat = span <= 0
    if constant is not None:
        flat = flat | np.asarray(constant, dtype=bool)[:, None, None]
    safe = np.where(flat, 1.0, span)
    return np.where(flat, 0.0, (cams - lo) / safe)


def compute_cam(f, head, out_size):
    """Class activation maps ``sum_d w[c, d] f[d]``, upsampled to ``out_size`` and scaled to [0, 1]."""
    f = _features(f, head)
    out_h, out_w = out_size
    if out_h < f.shape[1] or out_w < f.shape[2]:
        raise ShapeMismatch(f"output size {out_size} smaller than feature grid {f.shape[1:]}")
    raw = np.einsum("cd,dhw->chw", head.weight, f)
    constant = raw.max(axis=(1, 2)) == raw.min(axis=(1, 2))
    return normalize_per_class(upsample_bilinear(raw, (out_h, out_w)), constant)
