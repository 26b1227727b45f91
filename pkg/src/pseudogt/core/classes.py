"""The 13-category indoor taxonomy and label-map conventions."""

import numpy as np

CLASS_NAMES = (
    "bed",
    "books",
    "ceil",
    "chair",
    "floor",
    "furniture",
    "objects",
    "painting",
    "sofa",
    "table",
    "tv",
    "wall",
    "window",
)
NUM_CLASSES = len(CLASS_NAMES)

# Ignore index for u8 label files; never a valid class.
UNKNOWN = 255

_ALIASES = {
    "ceiling": "ceil",
    "furn": "furniture",
    "furn.": "furniture",
    "objs": "objects",
    "objs.": "objects",
    "paint": "painting",
}
CLASS_IDS = {name: i for i, name in enumerate(CLASS_NAMES)}


def class_id(name):
    """Map a category name (or common abbreviation) to its id."""
    key = str(name).strip().lower()
    key = _ALIASES.get(key, key)
    try:
        return CLASS_IDS[key]
    except KeyError:
        raise KeyError(f"unknown category {name!r}; expected one of {CLASS_NAMES}") from None


def class_name(cid):
    if cid == UNKNOWN:
        return "unknown"
    return CLASS_NAMES[cid]


def is_valid_label_map(labels):
    labels = np.asarray(labels)
    return bool(np.all((labels == UNKNOWN) | ((labels >= 0) & (labels < NUM_CLASSES))))


def as_label_map(labels):
    """Return ``labels`` as a 2-D uint8 array, checking the value domain."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
    if not is_valid_label_map(arr):
        bad = np.unique(arr[(arr != UNKNOWN) & ((arr < 0) | (arr >= NUM_CLASSES))])
        raise ValueError(f"label map holds invalid class ids {bad.tolist()}")
    return arr.astype(np.uint8, copy=False)
