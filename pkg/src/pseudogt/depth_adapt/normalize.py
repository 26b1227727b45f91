"""Per-image min-max depth normalization to [-1, 1]."""

from dataclasses import dataclass

import numpy as np

from ..core.depth import DepthMap
from ..errors import DegenerateRange, EmptyInput


@dataclass(frozen=True)
class NormalizedDepthMap:
    values: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def minmax_normalize(depth):
    """Rescale valid depths affinely so that their min is -1 and max is +1.

    Accepts a :class:`DepthMap` or a plain array (all pixels valid).
    Invalid pixels are left at 0 and stay flagged invalid.
    """
    if not isinstance(depth, DepthMap):
        arr = np.asarray(depth, dtype=np.float64)
        values, valid = arr, np.isfinite(arr)
    else:
        values, valid = depth.values, depth.valid
    v = values[valid]
    if v.size == 0:
        raise EmptyInput("depth map has no valid pixel")
    lo, hi = v.min(), v.max()
    if not hi > lo:
        raise DegenerateRange(f"all valid depths equal {lo!r}")
    out = np.zeros(values.shape, dtype=np.float64)
    out[valid] = 2.0 * ((v - lo) / (hi - lo) - 0.5)
    return NormalizedDepthMap(out, valid.copy())


def eta(x):
    """Min-max normalization of a fully valid array plus what ``eta_backward`` needs."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    imin, imax = int(np.argmin(flat)), int(np.argmax(flat))
    lo, hi = flat[imin], flat[imax]
    if not hi > lo:
        raise DegenerateRange(f"all values equal {lo!r}")
    y = 2.0 * ((x - lo) / (hi - lo) - 0.5)
    return y, (x, imin, imax, lo, hi)


def eta_backward(cache, gy):
    """Gradient of ``eta`` w.r.t. its input, with min/max routed to their argmin/argmax."""
    x, imin, imax, lo, hi = cache
    span = hi - lo
    gx = gy * (2.0 / span)
    rel = (x - lo) / (span * span)
    # d y_i / d lo = -2/span + 2 rel_i ; d y_i / d hi = -2 rel_i
    g_lo = float(np.sum(gy * (-2.0 / span + 2.0 * rel)))
    g_hi = float(np.sum(gy * (-2.0 * rel)))
    flat = gx.reshape(-1)
    flat[imin] += g_lo
    flat[imax] += g_hi
    return gx
