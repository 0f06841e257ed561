"""Joint transforms ``E exp(-lam X_t - gamma int_0^t X_u du)`` via Riccati flows.

Orientation: ``y_{x0}`` solves ``y' = 2y^2 - 2 y theta(t) - gamma`` forward
from ``y(0) = x0`` and ``phi(t, lam) = x0(t, lam)`` is the start point whose
flow lands on ``lam`` at time ``t``.  Worked case gamma = 0, theta = 0:
``y_{x0}(t) = x0 / (1 - 2 x0 t)`` so ``phi = lam / (1 + 2 lam t)``, the
familiar squared Bessel characteristic.  Inversion integrates the same ODE
backward from ``y(t) = lam``; along the way the backward path is exactly
``y_phi(u)``, so ``psi = int_0^t Delta(u) y_phi(u) du`` comes for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, DomainError, NotInvertibleError, NumericalError
from .numerics.ode import solve_ode_rk4
from .numerics.quadrature import DEFAULT_QUADRATURE, QuadratureConfig, integrate
from .numerics.timefunc import TimeFunction, as_time_function
from .processes import (
    BESQ_FAMILIES,
    GBesqI,
    SquaredBesselBridge,
    SquaredRadialOU,
    TransformQuery,
    laplace_marginal,
)

BRIDGE_T_CAP = 1.0 - 1e-6
BRIDGE_CHECK_T = 0.99
DEFAULT_STEPS = 2000
_TAGS = ("gbesq1", "srou", "bridge", "numeric")


@dataclass(frozen=True)
class RiccatiFlow:
    """Flow of ``y' = 2y^2 - 2 y theta(t) - gamma``.

    ``representation`` is ``"numeric"`` (RK4 with ``n_steps``) or one of the
    closed-form tags ``"gbesq1"`` (theta = 0), ``"srou"`` (theta = -alpha)
    and ``"bridge"`` (theta = -1/(1-t)).
    """

    theta: TimeFunction
    gamma: float
    representation: str = "numeric"
    n_steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if self.gamma < 0:
            raise DomainError("gamma must be >= 0")
        if self.representation not in _TAGS:
            raise DomainError(f"unknown representation {self.representation!r}")
        object.__setattr__(self, "theta", as_time_function(self.theta))
        if self.representation == "gbesq1" and not (self.theta.is_constant and self.theta.value == 0):
            raise DomainError("gbesq1 tag needs theta = 0")
        if self.representation == "srou" and not self.theta.is_constant:
            raise DomainError("srou tag needs a constant theta = -alpha")
        steps = max(2, int(self.n_steps))
        object.__setattr__(self, "n_steps", steps + (steps % 2))

    @classmethod
    def for_spec(cls, spec, gamma: float, representation: str | None = None, n_steps: int = DEFAULT_STEPS):
        """Flow matching a squared-Bessel-type family (closed-form tag by default)."""
        if not isinstance(spec, BESQ_FAMILIES):
            raise DomainError(f"no Riccati flow for family {spec.family!r}")
        _, theta = spec.profiles()
        if representation is None:
            representation = {
                GBesqI: "gbesq1",
                SquaredRadialOU: "srou",
                SquaredBesselBridge: "bridge",
            }.get(type(spec), "numeric")
        return cls(theta, gamma, representation, n_steps)

    @property
    def alpha(self) -> float:
        """GDLP rate sqrt(gamma/2) for gbesq1 and bridge; OU rate for srou."""
        if self.representation == "srou":
            return -float(self.theta.value)
        return math.sqrt(self.gamma / 2.0)

    def rhs(self, t, y):
        th = self.theta.value if self.theta.is_constant else float(self.theta(t))
        return 2.0 * y * y - 2.0 * y * th - self.gamma


# closed-form pieces ---------------------------------------------------------


def _gdlp_flow(alpha, z0, t):
    """Forward flow of ``z' = 2 z^2 - 2 alpha^2``."""
    if alpha == 0:
        den = 1.0 - 2.0 * z0 * t
        return z0 / den, den
    e = np.exp(4.0 * alpha * t)
    den = 2.0 * alpha - (z0 - alpha) * np.expm1(4.0 * alpha * t)
    return alpha * (1.0 + 2.0 * (z0 - alpha) * e / den), den


def _gdlp_inverse(alpha, lam, t):
    if alpha == 0:
        return lam / (1.0 + 2.0 * lam * t)
    e = math.exp(4.0 * alpha * t)
    return alpha * (1.0 + 2.0 * (lam - alpha) / (2.0 * alpha * e + (lam - alpha) * math.expm1(4.0 * alpha * t)))


def _ou_rate(alpha, gamma):
    return 0.5 * (math.sqrt(alpha * alpha + 2.0 * gamma) - alpha)


def _ou_flow(alpha, gamma, x0, t):
    a = _ou_rate(alpha, gamma)
    k = 2.0 * a + alpha
    if k == 0:
        den = 1.0 - 2.0 * x0 * t
        return x0 / den, den
    e = np.exp(2.0 * t * k)
    den = k - (x0 - a) * np.expm1(2.0 * t * k)
    return a + e * (x0 - a) * k / den, den


def _ou_inverse(alpha, gamma, lam, t):
    a = _ou_rate(alpha, gamma)
    k = 2.0 * a + alpha
    if k == 0:
        return lam / (1.0 + 2.0 * lam * t)
    e = math.exp(2.0 * t * k)
    return a + (lam - a) * k / (e * (a + alpha + lam) + a - lam)


def ou_log_psi(delta: float, alpha: float, gamma: float, t: float, lam: float) -> float:
    """``delta a t - (delta/2) log|1 + (lam - a)(1 - e^{2t(alpha+2a)}) / (e^{2t(alpha+2a)}(a+lam+alpha) + a - lam)|``."""
    a = _ou_rate(alpha, gamma)
    k = 2.0 * a + alpha
    if k == 0:
        return 0.5 * delta * math.log1p(2.0 * lam * t)
    e = math.exp(2.0 * t * k)
    inner = 1.0 + (lam - a) * (-math.expm1(2.0 * t * k)) / (e * (a + lam + alpha) + a - lam)
    return delta * a * t - 0.5 * delta * math.log(abs(inner))


def gdlp_log_area(alpha: float, z0: float, t: float) -> float:
    """``int_0^t z`` along the flow of ``z' = 2 z^2 - 2 alpha^2`` from ``z0``.

    ``z = -w'/(2w)`` with ``w'' = 4 alpha^2 w``, so the area is ``-(1/2) log w(t)``.
    """
    if alpha == 0:
        return -0.5 * math.log1p(-2.0 * z0 * t)
    den = 2.0 * alpha - (z0 - alpha) * math.expm1(4.0 * alpha * t)
    return alpha * t - 0.5 * math.log(den / (2.0 * alpha))


def _bridge_flow(alpha, x0, t):
    # z = y + 1/(2(1-t)) follows the theta = 0 flow from x0 + 1/2
    z, den = _gdlp_flow(alpha, x0 + 0.5, t)
    return z - 0.5 / (1.0 - t), den


def _bridge_inverse(alpha, lam, t):
    return _gdlp_inverse(alpha, lam + 0.5 / (1.0 - t), t) - 0.5


def bridge_displayed_flow(gamma: float, x0: float, t: float) -> float:
    """A bridge flow with a constant ``-1/2`` shift instead of ``-1/(2(1-t))``.

    Kept for comparison only: it does not solve ``y' = 2y^2 + 2y/(1-t) - gamma``
    for ``t > 0``.  The consistent flow subtracts ``1/(2(1-t))``.
    """
    alpha = math.sqrt(gamma / 2.0)
    z, _ = _gdlp_flow(alpha, x0 + 0.5, t)
    return float(z) - 0.5


# flow, inverse, transform ---------------------------------------------------


def _check_den(den, t, x0):
    if np.any(np.asarray(den) <= 0):
        raise BlowUpError(f"flow from x0={x0} blows up before t={t}", t, float("inf"))


def riccati_flow(rf: RiccatiFlow, x0: float, t: float, t0: float = 0.0) -> float:
    """``y(t)`` for the flow started at ``y(t0) = x0`` (closed forms need ``t0 = 0``)."""
    if t < t0:
        raise DomainError("riccati_flow integrates forward: need t >= t0")
    if t == t0:
        return float(x0)
    tag = rf.representation
    if tag != "numeric" and t0 != 0:
        raise DomainError("closed-form tags are anchored at t0 = 0")
    if tag == "gbesq1":
        y, den = _gdlp_flow(rf.alpha, x0, t)
    elif tag == "srou":
        y, den = _ou_flow(rf.alpha, rf.gamma, x0, t)
    elif tag == "bridge":
        if t >= 1.0:
            raise DomainError("bridge flow is defined for t < 1")
        y, den = _bridge_flow(rf.alpha, x0, t)
    else:
        return solve_ode_rk4(rf.rhs, x0, t0, t, rf.n_steps).y_end
    _check_den(den, t, x0)
    return float(y)


def _backward_path(rf: RiccatiFlow, t: float, lam: float):
    try:
        path = solve_ode_rk4(rf.rhs, lam, t, 0.0, rf.n_steps)
    except BlowUpError as exc:
        raise NotInvertibleError(f"backward flow from lam={lam} at t={t} blew up: {exc}") from exc
    return path.t[::-1], path.y[::-1]


def invert_flow(rf: RiccatiFlow, t: float, lam: float) -> float:
    """``x0(t, lam)``: the start point whose flow reaches ``lam`` at time ``t``."""
    if t == 0:
        return float(lam)
    tag = rf.representation
    if tag == "gbesq1":
        return float(_gdlp_inverse(rf.alpha, lam, t))
    if tag == "srou":
        return float(_ou_inverse(rf.alpha, rf.gamma, lam, t))
    if tag == "bridge":
        if t >= 1.0:
            raise DomainError("bridge flow is defined for t < 1")
        return float(_bridge_inverse(rf.alpha, lam, t))
    _, ys = _backward_path(rf, t, lam)
    return float(ys[0])


def _simpson_grid(ts, vals):
    h = ts[1] - ts[0]
    return float(h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum()))


def phi_psi(rf: RiccatiFlow, delta: TimeFunction, t: float, lam: float,
            cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """``(phi, psi)`` with ``psi = int_0^t Delta(u) y_phi(u) du``."""
    delta = as_time_function(delta)
    if t == 0:
        return float(lam), 0.0
    tag = rf.representation
    if tag == "numeric":
        ts, ys = _backward_path(rf, t, lam)
        return float(ys[0]), _simpson_grid(ts, delta(ts) * ys)
    phi = invert_flow(rf, t, lam)
    if tag == "gbesq1":
        flow = lambda u: _gdlp_flow(rf.alpha, phi, u)[0]  # noqa: E731
    elif tag == "srou":
        flow = lambda u: _ou_flow(rf.alpha, rf.gamma, phi, u)[0]  # noqa: E731
    else:
        flow = lambda u: _bridge_flow(rf.alpha, phi, u)[0]  # noqa: E731
    if tag == "bridge" and delta.is_constant:
        # near t = 1 the integrand is a difference of two huge terms; use the exact area
        psi = float(delta.value) * (gdlp_log_area(rf.alpha, phi + 0.5, t) + 0.5 * math.log1p(-t))
        if t <= BRIDGE_CHECK_T:
            quad = integrate(lambda u: delta(u) * flow(np.asarray(u, dtype=float)), 0.0, t, cfg)
            if abs(quad - psi) > 1e-7 * max(1.0, abs(psi)):
                raise NumericalError(f"bridge log area {psi!r} disagrees with quadrature {quad!r}")
        return float(phi), psi
    psi = integrate(lambda u: delta(u) * flow(np.asarray(u, dtype=float)), 0.0, t, cfg)
    if tag == "srou":
        logged = ou_log_psi(float(delta.value), rf.alpha, rf.gamma, t, lam)
        if abs(logged - psi) > 1e-7 * max(1.0, abs(psi)):
            raise NumericalError(f"OU log formula {logged!r} disagrees with quadrature {psi!r}")
        psi = logged
    return float(phi), float(psi)


def joint_laplace(spec, q: TransformQuery, representation: str | None = None,
                  n_steps: int = DEFAULT_STEPS, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``E exp(-lam X_t - gamma int_0^t X_u du)`` for a squared-Bessel-type family.

    gamma = 0 delegates to ``laplace_marginal``.  The bridge is served on
    ``[0, 1 - 1e-6]``; later times are clamped to that cap.
    """
    if not isinstance(spec, BESQ_FAMILIES):
        raise DomainError(f"joint transform not available for {spec.family!r}")
    if q.lam == 0 and q.gamma == 0:
        return 1.0
    if q.t == 0:
        return math.exp(-q.lam * spec.x0)
    if q.gamma == 0:
        return laplace_marginal(spec, q, cfg)
    t = q.t
    if isinstance(spec, SquaredBesselBridge):
        if t > 1.0:
            raise DomainError("bridge time domain is [0, 1]")
        t = min(t, BRIDGE_T_CAP)
    rf = RiccatiFlow.for_spec(spec, q.gamma, representation, n_steps)
    delta, _ = spec.profiles()
    phi, psi = phi_psi(rf, delta, t, q.lam, cfg)
    return math.exp(-spec.x0 * phi - psi)
