from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ..errors import BracketError


def find_root_brent(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Brent's method on a sign-changing bracket ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo:.3g}, f(hi)={fhi:.3g}")
    return float(brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))
