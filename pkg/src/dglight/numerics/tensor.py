"""Float64 tensor helpers for the autodiff core.

Tensors are plain numpy arrays; every constructor here coerces to C-contiguous
float64 so downstream graph ops and the optimizer can assume one dtype.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray


def tensor(data) -> Tensor:
    """Coerce ``data`` to a C-contiguous float64 array."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    return arr


def zeros(shape) -> Tensor:
    return np.zeros(shape, dtype=np.float64)


def glorot_uniform(shape, rng: np.random.Generator) -> Tensor:
    """Glorot (Xavier) uniform init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).

    For a 2-D weight [fan_in, fan_out] the fans are the two axes; for 1-D
    shapes both fans equal the single axis length.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ValueError("glorot_uniform needs at least one axis")
    fan_in = shape[0]
    fan_out = shape[-1] if len(shape) > 1 else shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)
