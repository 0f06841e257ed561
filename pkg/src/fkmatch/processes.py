"""Diffusion families, their SDE coefficients and marginal Laplace transforms.

Every family is an immutable dataclass.  ``coefficients(spec, t, x)``
returns ``(drift, diffusion)`` exactly as the SDE is written;
``laplace_marginal(spec, q)`` returns ``E exp(-lam X_t)``.

Squared-Bessel-type families share the SDE

    dX = 2 sqrt(X) dB + (Delta(t) + 2 theta(t) X) dt

and expose ``profiles()`` -> ``(Delta, theta)`` as TimeFunctions, which
is what the PDE-residual and Riccati machinery consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, SingularityError
from .numerics.quadrature import DEFAULT_QUADRATURE, QuadratureConfig, cumulative_integral, integrate
from .numerics.timefunc import TimeFunction, as_time_function

BRIDGE_T_MAX = 1.0


@dataclass(frozen=True)
class TransformQuery:
    t: float
    lam: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise DomainError(f"t must be >= 0, got {self.t}")
        if self.lam < 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")


# families -----------------------------------------------------------------


def _nonneg(name, value):
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True)
class GBesqI:
    """Generalized squared Bessel process, ``dX = 2 sqrt(X) dB + Delta(t) dt``."""

    x0: float
    delta: TimeFunction
    family = "gbesq1"

    def __post_init__(self):
        _nonneg("x0", self.x0)
        object.__setattr__(self, "delta", as_time_function(self.delta, role="nonnegative"))

    def profiles(self):
        return self.delta, TimeFunction.constant(0.0)

    def drift_diffusion(self, t, x):
        return self.delta(t) + 0.0 * x, 2.0 * np.sqrt(np.maximum(x, 0.0))


@dataclass(frozen=True)
class GBesqII:
    """``dX = 2 sqrt(X) dB + (Delta(t) + 2 theta(t) X) dt`` with theta <= 0."""

    x0: float
    delta: TimeFunction
    theta: TimeFunction
    family = "gbesq2"

    def __post_init__(self):
        _nonneg("x0", self.x0)
        object.__setattr__(self, "delta", as_time_function(self.delta, role="nonnegative"))
        object.__setattr__(self, "theta", as_time_function(self.theta, role="nonpositive"))

    def profiles(self):
        return self.delta, self.theta

    def drift_diffusion(self, t, x):
        return self.delta(t) + 2.0 * self.theta(t) * x, 2.0 * np.sqrt(np.maximum(x, 0.0))


@dataclass(frozen=True)
class SquaredRadialOU:
    """``dX = 2 sqrt(X) dB + (delta - 2 alpha X) dt``."""

    x0: float
    delta: float
    alpha: float
    family = "srou"

    def __post_init__(self):
        _nonneg("x0", self.x0)
        _nonneg("delta", self.delta)
        _nonneg("alpha", self.alpha)

    def profiles(self):
        return TimeFunction.constant(self.delta), TimeFunction.constant(-self.alpha)

    def drift_diffusion(self, t, x):
        return self.delta - 2.0 * self.alpha * x, 2.0 * np.sqrt(np.maximum(x, 0.0))


def _bridge_theta(t):
    return -1.0 / (1.0 - np.asarray(t, dtype=float)) if np.ndim(t) else -1.0 / (1.0 - t)


@dataclass(frozen=True)
class SquaredBesselBridge:
    """``dX = 2 sqrt(X) dB + (delta - 2X/(1-t)) dt`` on ``[0, 1)``, pinned at 0 at t = 1."""

    x0: float
    delta: float
    family = "bridge"

    def __post_init__(self):
        _nonneg("x0", self.x0)
        _nonneg("delta", self.delta)

    def profiles(self):
        theta = TimeFunction.from_callable(_bridge_theta, t_max=1.0 - 1e-9, name="-1/(1-t)")
        return TimeFunction.constant(self.delta), theta

    def drift_diffusion(self, t, x):
        return self.delta - 2.0 * x / (1.0 - t), 2.0 * np.sqrt(np.maximum(x, 0.0))


@dataclass(frozen=True)
class Pgsce:
    """Population growth in a crowded environment, ``dX = X dB - c X^2 dt``."""

    x0: float
    c: float
    family = "pgsce"

    def __post_init__(self):
        if not self.x0 > 0:
            raise DomainError("PGSCE needs x0 > 0")
        if not self.c > 0:
            raise DomainError("PGSCE needs c > 0")

    def drift_diffusion(self, t, x):
        return -self.c * x * x, x


@dataclass(frozen=True)
class BAff:
    """``dX = sqrt(|X^2 + 2X|) dB + (b X + a) dt``."""

    x0: float
    a: float
    b: float
    family = "baff"

    def __post_init__(self):
        _nonneg("x0", self.x0)
        _nonneg("a", self.a)

    def drift_diffusion(self, t, x):
        return self.b * x + self.a, np.sqrt(np.abs(x * x + 2.0 * x))


@dataclass(frozen=True)
class CoshBM:
    """``cosh(B_t)`` with ``B_0 = 0``; generator coefficients (z/2, sqrt(z^2 - 1))."""

    x0: float = 1.0
    family = "cosh"

    def __post_init__(self):
        if self.x0 != 1.0:
            raise DomainError("CoshBM always starts at cosh(0) = 1")

    def drift_diffusion(self, t, z):
        return 0.5 * z, np.sqrt(np.maximum(z * z - 1.0, 0.0))


def _sqrt_sigma(x):
    return 2.0 * np.sqrt(np.maximum(x, 0.0))


def _sqrt_dsigma(x):
    return 1.0 / np.sqrt(x)


def _sqrt_drift(x):
    # (sigma/2)(1 + sigma') simplified so it stays finite at x = 0
    return np.sqrt(np.maximum(x, 0.0)) + 1.0


def _exp_sqrt(x):
    return np.exp(np.sqrt(np.maximum(x, 0.0)))


@dataclass(frozen=True)
class GeomAssoc:
    """Diffusion whose drift is forced to ``(sigma/2)(1 + sigma')``.

    For such a diffusion ``f(X_t) = f(x0) exp(B_t + t/2)`` with
    ``f(x) = exp(int_anchor^x dz / sigma(z))``.  ``transform`` may be given
    in closed form; otherwise it is computed by quadrature from ``anchor``.
    """

    x0: float
    sigma: Callable = field(compare=False)
    dsigma: Callable = field(compare=False)
    anchor: float = 1.0
    transform: Callable | None = field(default=None, compare=False)
    drift_fn: Callable | None = field(default=None, compare=False)
    name: str = "custom"
    family = "geom"

    def __post_init__(self):
        s = float(self.sigma(self.x0))
        if not abs(s) > 0:
            raise DomainError("GeomAssoc requires |sigma(x0)| > 0")

    @classmethod
    def sqrt_example(cls, x0: float) -> "GeomAssoc":
        """sigma(x) = 2 sqrt(x): drift sqrt(x) + 1 and f(x) = exp(sqrt(x))."""
        return cls(x0, _sqrt_sigma, _sqrt_dsigma, anchor=0.0, transform=_exp_sqrt,
                   drift_fn=_sqrt_drift, name="2*sqrt(x)")

    def f(self, x):
        if self.transform is not None:
            return self.transform(x)
        return assoc_transform(self.sigma, self.anchor, x)

    def drift_diffusion(self, t, x):
        sig = self.sigma(x)
        if self.drift_fn is not None:
            return self.drift_fn(x), sig
        with np.errstate(divide="ignore", invalid="ignore"):
            drift = 0.5 * sig * (1.0 + self.dsigma(x))
        return drift, sig


def assoc_transform(sigma: Callable, anchor: float, x, cfg: QuadratureConfig = DEFAULT_QUADRATURE):
    """``exp(int_anchor^x dz / sigma(z))`` by quadrature (scalar or array ``x``)."""

    def one(v):
        lo, hi = (anchor, v) if v >= anchor else (v, anchor)
        val = integrate(lambda z: 1.0 / sigma(z), lo, hi, cfg)
        return math.exp(val if v >= anchor else -val)

    if np.ndim(x):
        return np.array([one(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))
    return one(float(x))


@dataclass(frozen=True)
class Jacobi:
    """``dX = sqrt(X(1-X)) dB + (b - a X) dt`` on ``[0, 1]``."""

    x0: float
    a: float
    b: float
    family = "jacobi"

    def __post_init__(self):
        if not 0.0 <= self.x0 <= 1.0:
            raise DomainError("Jacobi x0 must lie in [0, 1]")

    def drift_diffusion(self, t, x):
        return self.b - self.a * x, np.sqrt(np.clip(x * (1.0 - x), 0.0, None))


ProcessSpec = (GBesqI, GBesqII, SquaredRadialOU, SquaredBesselBridge, Pgsce, BAff, CoshBM, GeomAssoc, Jacobi)
BESQ_FAMILIES = (GBesqI, GBesqII, SquaredRadialOU, SquaredBesselBridge)


def time_domain(spec) -> float:
    return BRIDGE_T_MAX if isinstance(spec, SquaredBesselBridge) else math.inf


def coefficients(spec, t: float, x: float) -> tuple[float, float]:
    """``(drift, diffusion)`` at ``(t, x)``; raises DomainError outside the state space."""
    if t < 0 or t > time_domain(spec) or (isinstance(spec, SquaredBesselBridge) and t >= 1.0):
        raise DomainError(f"t={t} outside the time domain of {spec.family}")
    if isinstance(spec, Jacobi):
        ok = 0.0 <= x <= 1.0
    elif isinstance(spec, CoshBM):
        ok = x >= 1.0
    elif isinstance(spec, Pgsce):
        ok = x > 0
    else:
        ok = x >= 0
    if not ok:
        raise DomainError(f"state x={x} outside the state space of {spec.family}")
    drift, diff = spec.drift_diffusion(t, x)
    return float(drift), float(diff)


# marginal transforms ------------------------------------------------------


def _check_query(spec, q: TransformQuery):
    if q.t > time_domain(spec):
        raise DomainError(f"t={q.t} outside the time domain of {spec.family}")


def srou_characteristic(alpha: float, t: float, lam: float) -> float:
    """Solution of ``y' = -2 y (y + alpha)``, ``y(0) = lam``."""
    if lam == 0:
        return 0.0
    if alpha == 0:
        return lam / (1.0 + 2.0 * lam * t)
    # alpha / ((1 + alpha/lam) e^{2 alpha t} - 1) written without the 1/lam
    return lam * alpha / (alpha * math.exp(2 * alpha * t) + lam * math.expm1(2 * alpha * t))


def _srou_characteristic_vec(alpha, t, lam):
    t = np.asarray(t, dtype=float)
    if alpha == 0:
        return lam / (1.0 + 2.0 * lam * t)
    return lam * alpha / (alpha * np.exp(2 * alpha * t) + lam * np.expm1(2 * alpha * t))


def gbesq2_phi_psi(
    delta: TimeFunction,
    theta: TimeFunction,
    t: float,
    lam: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> tuple[float, float]:
    """``(phi, psi)`` with ``E exp(-lam X_t) = exp(-x phi - psi)`` for GBesqII.

    ``k(u) = exp(-2 int_0^u theta)``, ``K(u) = int_0^u k``,
    ``phi = lam / (k(t) + 2 lam K(t))`` and
    ``psi = phi int_0^t Delta(u) k(u) / (1 - 2 phi K(u)) du``.
    The inner cumulative integrals use Gauss-Legendre cut at the profiles'
    breakpoints; the outer one uses ``cfg``.
    """
    if lam < 0 or t < 0:
        raise DomainError("gbesq2_phi_psi needs t >= 0 and lam >= 0")
    if lam == 0:
        return 0.0, 0.0
    if t == 0:
        return float(lam), 0.0
    cuts = tuple(theta.breakpoints)
    all_cuts = tuple(sorted(set(cuts) | set(delta.breakpoints)))

    def k(u):
        return np.exp(-2.0 * cumulative_integral(theta, u, cuts))

    def big_k(u):
        return cumulative_integral(k, u, cuts)

    k_t = float(k(np.array([t]))[0])
    K_t = float(big_k(np.array([t]))[0])
    phi = lam / (k_t + 2.0 * lam * K_t)

    def integrand(u):
        u = np.asarray(u, dtype=float)
        den = 1.0 - 2.0 * phi * big_k(u)
        if np.any(den <= 0):
            raise SingularityError(
                f"1 - 2 z K(u) <= 0 inside [0, {t}] (min {den.min():.3g}); invalid profiles?"
            )
        return delta(u) * k(u) / den

    if all_cuts:
        edges = [0.0, *[c for c in all_cuts if c < t], t]
        inner = sum(integrate(integrand, lo, hi, cfg) for lo, hi in zip(edges[:-1], edges[1:]))
    else:
        inner = integrate(integrand, 0.0, t, cfg)
    return float(phi), float(phi * inner)


def laplace_marginal(spec, q: TransformQuery, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``E exp(-lam X_t)`` via each family's designated evaluation path."""
    if q.gamma != 0:
        raise DomainError("laplace_marginal is the gamma = 0 transform; use joint_laplace")
    if not isinstance(spec, BESQ_FAMILIES):
        raise DomainError(f"no closed-form marginal transform for family {spec.family!r}")
    _check_query(spec, q)
    t, lam, x = q.t, q.lam, spec.x0
    if lam == 0:
        return 1.0
    if t == 0:
        return math.exp(-lam * x)

    if isinstance(spec, GBesqI):
        char = lam / (1.0 + 2.0 * lam * t)
        if spec.delta.is_constant:
            # constant-dimension fast path: lam int_0^t d/(1+2 lam u) du = (d/2) log(1 + 2 lam t)
            integral_term = 0.5 * spec.delta.value * math.log1p(2.0 * lam * t)
        else:
            integral_term = lam * _integrate_split(
                lambda u: spec.delta(t - u) / (1.0 + 2.0 * lam * u),
                t,
                [t - b for b in spec.delta.breakpoints],
                cfg,
            )
        return math.exp(-x * char - integral_term)

    if isinstance(spec, GBesqII):
        phi, psi = gbesq2_phi_psi(spec.delta, spec.theta, t, lam, cfg)
        return math.exp(-x * phi - psi)

    if isinstance(spec, SquaredRadialOU):
        y_t = srou_characteristic(spec.alpha, t, lam)
        area = integrate(lambda u: _srou_characteristic_vec(spec.alpha, u, lam), 0.0, t, cfg)
        return math.exp(-x * y_t - spec.delta * area)

    # squared Bessel bridge: displayed closed form, valid on [0, 1]
    s = 1.0 + 2.0 * lam * t * (1.0 - t)
    return s ** (-0.5 * spec.delta) * math.exp(-x * lam * (1.0 - t) ** 2 / s)


def _integrate_split(f, t, cuts, cfg):
    edges = [0.0, *sorted(c for c in cuts if 0.0 < c < t), t]
    return sum(integrate(f, lo, hi, cfg) for lo, hi in zip(edges[:-1], edges[1:]))


# displayed formulas kept for side-by-side comparison ----------------------


def srou_displayed_transform(x: float, delta: float, alpha: float, t: float, lam: float) -> float:
    """A plausible but wrong closed form for the squared radial OU transform.

    ``exp(-lam delta/2 - alpha (x - delta/2) / ((1 + alpha/lam) e^{2 t alpha} - 1))``.
    It is not a solution of the transform PDE; see ``laplace_marginal`` for
    the characteristics-based value.
    """
    if lam == 0:
        return 1.0
    den = (1.0 + alpha / lam) * math.exp(2.0 * t * alpha) - 1.0
    return math.exp(-lam * delta / 2.0 - alpha * (x - delta / 2.0) / den)


def constant_theta_displayed_characteristic(c: float, t: float, lam: float) -> float:
    """``lam c e^{2ct} / (c + 2 lam (e^{2ct} - 1))`` as displayed for constant theta = c."""
    if c == 0:
        return lam / (1.0 + 4.0 * lam * t)
    return lam * c * math.exp(2 * c * t) / (c + 2.0 * lam * math.expm1(2 * c * t))


def constant_theta_characteristic(c: float, t: float, lam: float) -> float:
    """Closed form of ``phi`` for constant theta = c: ``lam c e^{2ct} / (c + lam (e^{2ct} - 1))``."""
    if c == 0:
        return lam / (1.0 + 2.0 * lam * t)
    return lam * c * math.exp(2 * c * t) / (c + lam * math.expm1(2 * c * t))


def constant_theta_transform(
    x: float, delta: TimeFunction, c: float, t: float, lam: float, characteristic: Callable,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """``exp(-x y(t, lam) - int_0^t Delta(t-u) y(u, lam) du)`` for a given characteristic ``y``."""
    delta = as_time_function(delta)
    y_t = characteristic(c, t, lam)
    vec = np.vectorize(lambda u: characteristic(c, float(u), lam), otypes=[float])
    area = integrate(lambda u: delta(t - u) * vec(u), 0.0, t, cfg) if t > 0 else 0.0
    return math.exp(-x * y_t - area)
