"""Tiny residual mappings used as desk-scale noise (N) and restore (R) models.

Each output pixel is ``x + g(patch)`` clamped to [-1, 1], where ``patch`` is
the 3x3 edge-replicated neighbourhood and ``g`` is either affine
(``hidden == 0``) or a one-hidden-layer tanh perceptron.  The same patch
perceptron, averaged over pixels, is the discriminator's logit.

Parameter vector layout:
    hidden == 0:  w[9], b
    hidden  > 0:  W1[hidden, 9], b1[hidden], w2[hidden], b2
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFinite, ShapeMismatch
from .normalize import NormalizedDepthMap

WINDOW = 9
ROLES = ("noise", "restore")


def n_params(hidden):
    return WINDOW + 1 if hidden == 0 else hidden * (WINDOW + 2) + 1


@dataclass
class MappingParams:
    role: str
    hidden: int
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.shape != (n_params(self.hidden),):
            raise ShapeMismatch(
                f"hidden={self.hidden} needs {n_params(self.hidden)} parameters, got {self.vector.shape}"
            )
        if not np.all(np.isfinite(self.vector)):
            raise NonFinite("mapping parameters must be finite")

    @classmethod
    def identity(cls, role, hidden=4):
        """Zero residual branch: the mapping is the identity."""
        return cls(role, hidden, np.zeros(n_params(hidden)))

    @classmethod
    def random(cls, role, hidden, rng, scale=0.3):
        vec = rng.normal(0.0, scale, n_params(hidden))
        return cls(role, hidden, vec)

    def copy(self):
        return MappingParams(self.role, self.hidden, self.vector.copy())

    def to_array(self):
        """Flat f64 array: ``[role_code, hidden, *vector]`` for TensorFile storage."""
        return np.concatenate([[ROLES.index(self.role), self.hidden], self.vector])

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        return cls(ROLES[int(arr[0])], int(arr[1]), arr[2:])


def unpack(vector, hidden):
    if hidden == 0:
        return vector[:WINDOW], vector[WINDOW]
    h = hidden
    w1 = vector[: h * WINDOW].reshape(h, WINDOW)
    b1 = vector[h * WINDOW : h * (WINDOW + 1)]
    w2 = vector[h * (WINDOW + 1) : h * (WINDOW + 2)]
    b2 = vector[h * (WINDOW + 2)]
    return w1, b1, w2, b2


_INDEX_CACHE = {}


def patch_index(shape):
    """Flat source index of each 3x3 neighbour, shape ``(H, W, 9)``, borders replicated."""
    if shape not in _INDEX_CACHE:
        h, w = shape
        rows, cols = np.arange(h), np.arange(w)
        idx = np.empty((h, w, WINDOW), dtype=np.intp)
        k = 0
        for dy in (-1, 0, 1):
            r = np.clip(rows + dy, 0, h - 1)
            for dx in (-1, 0, 1):
                c = np.clip(cols + dx, 0, w - 1)
                idx[:, :, k] = r[:, None] * w + c[None, :]
                k += 1
        idx.flags.writeable = False
        _INDEX_CACHE[shape] = idx
    return _INDEX_CACHE[shape]


def patch_mlp_forward(vector, hidden, x):
    """Per-pixel residual ``g(patch)``; returns ``(delta, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D map, got shape {x.shape}")
    idx = patch_index(x.shape)
    patches = x.ravel()[idx]
    if hidden == 0:
        w, b = unpack(vector, 0)
        return patches @ w + b, (x.shape, idx, patches, None)
    w1, b1, w2, b2 = unpack(vector, hidden)
    act = np.tanh(patches @ w1.T + b1)
    return act @ w2 + b2, (x.shape, idx, patches, act)


def patch_mlp_backward(vector, hidden, cache, gdelta):
    """Gradients of ``sum(gdelta * delta)`` w.r.t. the parameter vector and the input map."""
    shape, idx, patches, act = cache
    if hidden == 0:
        w, _ = unpack(vector, 0)
        gvec = np.concatenate([np.einsum("ij,ijk->k", gdelta, patches), [gdelta.sum()]])
        gpatch = gdelta[..., None] * w
    else:
        w1, _, w2, _ = unpack(vector, hidden)
        gz = gdelta[..., None] * w2 * (1.0 - act * act)
        gvec = np.concatenate(
            [
                np.einsum("ijh,ijk->hk", gz, patches).ravel(),
                gz.sum(axis=(0, 1)),
                np.einsum("ij,ijh->h", gdelta, act),
                [gdelta.sum()],
            ]
        )
        gpatch = gz @ w1
    gx = np.bincount(idx.ravel(), weights=gpatch.ravel(), minlength=shape[0] * shape[1])
    return gvec, gx.reshape(shape)


def mapping_forward(params, x):
    """Forward pass; returns ``(y, cache)`` for :func:`mapping_backward`."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    delta, inner = patch_mlp_forward(params.vector, params.hidden, x)
    pre = x + delta
    y = np.clip(pre, -1.0, 1.0)
    return y, (inner, (pre > -1.0) & (pre < 1.0))


def mapping_backward(params, cache, gy):
    """Returns ``(grad_vector, grad_input)``; the clamp passes no gradient where it is active."""
    inner, open_mask = cache
    gpre = np.where(open_mask, gy, 0.0)
    gvec, gx = patch_mlp_backward(params.vector, params.hidden, inner, gpre)
    return gvec, gx + gpre


def apply_mapping(params, x):
    """Evaluate a noise/restore mapping on a normalized depth map.

    Returns the same kind of object it was given: a bare array, or a
    :class:`NormalizedDepthMap` carrying the input's validity mask.
    """
    y, _ = mapping_forward(params, x)
    if isinstance(x, NormalizedDepthMap):
        return NormalizedDepthMap(y, x.valid.copy())
    return y
