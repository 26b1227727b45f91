from .classes import (
    CLASS_IDS,
    CLASS_NAMES,
    NUM_CLASSES,
    UNKNOWN,
    as_label_map,
    class_id,
    class_name,
    is_valid_label_map,
)
from .codec import decode_tensor, encode_tensor, load_tensor, save_tensor
from .depth import DepthMap
from .rng import derive_seed, splitmix64, stream

__all__ = [
    "CLASS_IDS",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "UNKNOWN",
    "DepthMap",
    "as_label_map",
    "class_id",
    "class_name",
    "decode_tensor",
    "derive_seed",
    "encode_tensor",
    "is_valid_label_map",
    "load_tensor",
    "save_tensor",
    "splitmix64",
    "stream",
]
