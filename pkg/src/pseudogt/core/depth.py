from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DepthMap:
    """Metric depth with a per-pixel validity mask.

    Invalid pixels (sensor holes) carry value 0 and ``valid == False``.
    """

    values: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or min(values.shape) < 1:
            raise ValueError(f"depth map must be a non-empty 2-D grid, got shape {values.shape}")
        if self.valid is None:
            valid = np.isfinite(values) & (values > 0)
        else:
            valid = np.array(self.valid, dtype=bool)
            if valid.shape != values.shape:
                raise ValueError("validity mask shape differs from depth shape")
        vv = values[valid]
        if not np.all(np.isfinite(vv)) or np.any(vv < 0):
            raise ValueError("valid depth values must be finite and nonnegative")
        values = np.where(valid, values, 0.0)
        values.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def from_millimeters(cls, mm):
        mm = np.asarray(mm)
        return cls(mm.astype(np.float64) / 1000.0, mm > 0)

    def to_millimeters(self):
        mm = np.round(self.values * 1000.0)
        return np.where(self.valid, np.clip(mm, 0, 65535), 0).astype(np.uint16)
