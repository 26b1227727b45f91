"""Parametric depth-sensor corruption (holes, quantization, edge jitter)."""

from dataclasses import dataclass

import numpy as np

from ..core.depth import DepthMap
from ..core.rng import stream


@dataclass(frozen=True)
class NoiseParams:
    hole_rate: float = 0.0
    hole_blob_radius: float = 0.0
    quantization_step: float = 0.0
    lateral_jitter_sigma: float = 0.0
    seed: int = 0
    # depth jump (meters) between 4-neighbours that marks an edge pixel for jitter
    edge_threshold: float = 0.05

    def __post_init__(self):
        for name in ("hole_rate", "hole_blob_radius", "quantization_step", "lateral_jitter_sigma", "edge_threshold"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.hole_rate > 1:
            raise ValueError("hole_rate must be <= 1")


def _edge_mask(values, valid, threshold):
    edge = np.zeros(values.shape, dtype=bool)
    dv = np.abs(np.diff(values, axis=0)) > threshold
    dv &= valid[1:] & valid[:-1]
    dh = np.abs(np.diff(values, axis=1)) > threshold
    dh &= valid[:, 1:] & valid[:, :-1]
    edge[1:] |= dv
    edge[:-1] |= dv
    edge[:, 1:] |= dh
    edge[:, :-1] |= dh
    return edge


def _jitter(values, valid, sigma, threshold, rng):
    edge = _edge_mask(values, valid, threshold)
    rows, cols = np.nonzero(edge)
    if rows.size == 0:
        return values, valid
    shift = np.rint(rng.normal(0.0, sigma, rows.size)).astype(int)
    src = np.clip(cols + shift, 0, values.shape[1] - 1)
    out, out_valid = values.copy(), valid.copy()
    out[rows, cols] = values[rows, src]
    out_valid[rows, cols] = valid[rows, src]
    return out, out_valid


def _quantize(values, step):
    return np.floor(values / step + 0.5) * step


def _punch_holes(shape, rate, radius, rng):
    """Boolean hole mask grown disk by disk until it covers ``rate`` of the image."""
    h, w = shape
    holes = np.zeros(shape, dtype=bool)
    target = rate * h * w
    r = int(np.ceil(radius))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    disk = yy * yy + xx * xx <= radius * radius
    count = 0
    while count < target:
        cy, cx = int(rng.integers(0, h)), int(rng.integers(0, w))
        y0, y1 = max(cy - r, 0), min(cy + r + 1, h)
        x0, x1 = max(cx - r, 0), min(cx + r + 1, w)
        holes[y0:y1, x0:x1] |= disk[y0 - cy + r : y1 - cy + r, x0 - cx + r : x1 - cx + r]
        count = int(holes.sum())
    return holes


def simulate_sensor_noise(depth, params):
    """Corrupt a clean depth map the way a structured-light sensor would.

    Edge pixels are displaced horizontally by rounded Gaussian offsets,
    valid depths are rounded to the nearest multiple of the quantization
    step, then disk-shaped holes are punched until about ``hole_rate`` of
    the pixels are invalid.  All-zero parameters return the input unchanged.
    """
    rng = stream(params.seed, "sensor-noise")
    values, valid = depth.values.copy(), depth.valid.copy()
    if params.lateral_jitter_sigma > 0:
        values, valid = _jitter(values, valid, params.lateral_jitter_sigma, params.edge_threshold, rng)
    if params.quantization_step > 0:
        values = np.where(valid, _quantize(values, params.quantization_step), 0.0)
    if params.hole_rate > 0:
        valid &= ~_punch_holes(values.shape, params.hole_rate, params.hole_blob_radius, rng)
    return DepthMap(np.where(valid, values, 0.0), valid)
