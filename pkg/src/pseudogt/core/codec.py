"""Bit-exact binary tensor container.

Layout (little-endian)::

    b"PLF1" | dtype code u8 | rank u8 | shape u32 * rank | row-major payload

Dtype codes: u8=1, u16=2, f32=3, f64=4.
"""

import struct

import numpy as np

from ..errors import BadMagic, TruncatedPayload, UnknownDtype, UnsupportedDtype

MAGIC = b"PLF1"

# (kind, itemsize) -> code
DTYPE_CODES = {("u", 1): 1, ("u", 2): 2, ("f", 4): 3, ("f", 8): 4}
CODE_DTYPES = {1: np.dtype("<u1"), 2: np.dtype("<u2"), 3: np.dtype("<f4"), 4: np.dtype("<f8")}


def encode_tensor(array):
    """Serialize ``array`` into a TensorFile byte string."""
    arr = np.asarray(array)
    try:
        code = DTYPE_CODES[(arr.dtype.kind, arr.dtype.itemsize)]
    except KeyError:
        raise UnsupportedDtype(f"dtype {arr.dtype} has no TensorFile code") from None
    if arr.ndim > 255:
        raise UnsupportedDtype(f"rank {arr.ndim} exceeds 255")
    payload = np.ascontiguousarray(arr, dtype=CODE_DTYPES[code]).tobytes(order="C")
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + payload


def decode_tensor(data):
    """Parse a TensorFile byte string back into a numpy array."""
    data = bytes(data)
    if len(data) < 6 or data[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {data[:4]!r}")
    code, rank = struct.unpack_from("<BB", data, 4)
    if code not in CODE_DTYPES:
        raise UnknownDtype(f"dtype code {code} is not one of {sorted(CODE_DTYPES)}")
    offset = 6 + 4 * rank
    if len(data) < offset:
        raise TruncatedPayload(f"header declares rank {rank} but only {len(data)} bytes present")
    shape = struct.unpack_from(f"<{rank}I", data, 6)
    dtype = CODE_DTYPES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = data[offset:]
    if len(payload) < expected:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, shape {shape} needs {expected}")
    if len(payload) > expected:
        raise TruncatedPayload(f"payload has {len(payload) - expected} trailing bytes")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def save_tensor(path, array):
    with open(path, "wb") as fh:
        fh.write(encode_tensor(array))


def load_tensor(path):
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())
