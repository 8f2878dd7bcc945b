"""Weight initializers. Both return plain arrays ready to wrap in a Parameter."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from satatree.errors import DimensionError


def _validate_shape(shape: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if not dims or any(d <= 0 for d in dims):
        raise DimensionError(f"invalid shape {tuple(shape)}: extents must be positive")
    return dims


def he_init(
    shape: Sequence[int],
    fan_in: int,
    rng: np.random.Generator,
    dtype: np.dtype | type = np.float64,
) -> np.ndarray:
    """Zero-mean normal with standard deviation sqrt(2 / fan_in)."""

    dims = _validate_shape(shape)
    if fan_in <= 0:
        raise DimensionError(f"fan_in must be positive, got {fan_in}")
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=dims).astype(dtype)


def uniform_init(
    shape: Sequence[int],
    lo: float,
    hi: float,
    rng: np.random.Generator,
    dtype: np.dtype | type = np.float64,
) -> np.ndarray:
    dims = _validate_shape(shape)
    if not lo < hi:
        raise DimensionError(f"uniform_init needs lo < hi, got [{lo}, {hi}]")
    return rng.uniform(lo, hi, size=dims).astype(dtype)


__all__ = ["he_init", "uniform_init"]
