"""File-type dispatch for pipeline inputs: ``.png`` images or TensorFiles (anything else)."""

import os

import numpy as np

from .core.classes import as_label_map
from .core.codec import load_tensor, save_tensor
from .core.depth import DepthMap
from .core.imageio import read_depth_png, read_label_png, read_ucm_png, write_label_png


def _is_png(path):
    return os.path.splitext(str(path))[1].lower() == ".png"


def read_labels(path):
    return read_label_png(path) if _is_png(path) else as_label_map(load_tensor(path))


def write_labels(path, labels):
    if _is_png(path):
        write_label_png(path, labels)
    else:
        save_tensor(path, as_label_map(labels))


def read_depth(path):
    """16-bit PNG in millimeters, or an f32/f64 TensorFile in meters (0 = invalid)."""
    if _is_png(path):
        return read_depth_png(path)
    arr = load_tensor(path).astype(np.float64)
    return DepthMap(arr, arr > 0)


def read_ucm(path):
    return read_ucm_png(path) if _is_png(path) else load_tensor(path).astype(np.float64)


def read_volume(path):
    return load_tensor(path).astype(np.float64)
