"""Modified Bessel function of the first kind, order zero (thin scipy wrappers)."""

from __future__ import annotations

import numpy as np
from scipy import special as _sp


def bessel_i0(z: float) -> float:
    """I0(z) for real ``z >= 0``."""
    if z < 0:
        raise ValueError("bessel_i0 expects z >= 0")
    return float(_sp.i0(z))


def bessel_i0e(z: float) -> float:
    """Exponentially scaled ``e^{-z} I0(z)``; use it when ``z`` is large."""
    if z < 0:
        raise ValueError("bessel_i0e expects z >= 0")
    return float(_sp.i0e(z))


def bessel_i0e_vec(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("bessel_i0e expects z >= 0")
    return _sp.i0e(z)
