"""PNG readers/writers for label maps, depth and UCMs."""

import numpy as np
from PIL import Image

from .classes import as_label_map
from .depth import DepthMap


def read_label_png(path):
    with Image.open(path) as im:
        if im.mode not in ("L", "P"):
            raise ValueError(f"{path}: label PNG must be 8-bit grayscale, got mode {im.mode}")
        return as_label_map(np.array(im, dtype=np.uint8))


def write_label_png(path, labels):
    Image.fromarray(as_label_map(labels), mode="L").save(path, format="PNG")


def read_depth_png(path):
    """16-bit PNG in millimeters, 0 = invalid."""
    with Image.open(path) as im:
        arr = np.array(im)
    if arr.dtype not in (np.uint16, np.int32, np.uint8) or arr.ndim != 2:
        raise ValueError(f"{path}: depth PNG must be single-channel 16-bit, got {arr.dtype} {arr.shape}")
    return DepthMap.from_millimeters(arr.astype(np.int64))


def write_depth_png(path, depth):
    Image.fromarray(depth.to_millimeters()).save(path, format="PNG")


def read_ucm_png(path):
    with Image.open(path) as im:
        arr = np.array(im.convert("L"), dtype=np.float64)
    return arr / 255.0
