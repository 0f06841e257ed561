"""Classical fourth-order Runge-Kutta (scalar or elementwise-vector state)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import BlowUpError

BLOWUP_LEVEL = 1e150


@dataclass(frozen=True)
class OdePath:
    t: np.ndarray
    y: np.ndarray

    @property
    def y_end(self):
        end = self.y[-1]
        return float(end) if np.ndim(end) == 0 else end


def solve_ode_rk4(
    rhs: Callable[[float, float], float], y0: float, t0: float, t1: float, n_steps: int
) -> OdePath:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` with fixed steps.

    ``t1 < t0`` integrates backward.  A non-finite or huge state raises
    :class:`BlowUpError` carrying the last valid ``(t, y)``.  An array
    ``y0`` integrates independent components in lockstep.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    ts = np.linspace(t0, t1, n_steps + 1)
    h = (t1 - t0) / n_steps
    y = np.asarray(y0, dtype=float)
    scalar = y.ndim == 0
    y = float(y) if scalar else y.copy()
    ys = np.empty((n_steps + 1,) + np.shape(y))
    ys[0] = y
    for i in range(n_steps):
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > BLOWUP_LEVEL:
            est = None
            if scalar and k1 != 0 and y != 0 and np.sign(k1) == np.sign(y) * np.sign(h):
                est = t + y / k1
            raise BlowUpError(f"solution left the finite range near t={t:.6g}", t, y, est)
        y = y_new
        ys[i + 1] = y
    return OdePath(ts, ys)
