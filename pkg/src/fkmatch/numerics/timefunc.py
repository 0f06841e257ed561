"""Scalar functions of time used as dimension and drift profiles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import DomainError
from . import expr as _expr

ROLE_CHECK_POINTS = 2001


@dataclass(frozen=True, eq=False)
class TimeFunction:
    """A deterministic, vectorised function ``t -> value`` on ``[0, t_max]``.

    Build instances with :meth:`constant`, :meth:`piecewise_linear` or
    :meth:`expression` (or :func:`parse_time_function`).  ``role`` is one of
    ``None``, ``"nonnegative"`` (dimension profiles) or ``"nonpositive"``
    (linear drift profiles) and is checked at construction on a dense grid
    plus every knot.
    """

    kind: str
    t_max: float
    _fn: Callable = field(repr=False)
    value: float | None = None
    knots: tuple[tuple[float, float], ...] = ()
    source: str | None = None
    tree: object = field(default=None, repr=False)
    role: str | None = None

    def __post_init__(self):
        if not self.t_max > 0:
            raise DomainError("t_max must be positive")
        if self.role not in (None, "nonnegative", "nonpositive"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role is not None:
            grid = np.linspace(0.0, self.t_max, ROLE_CHECK_POINTS)
            if self.knots:
                grid = np.union1d(grid, [k for k, _ in self.knots if 0 <= k <= self.t_max])
            vals = self(grid)
            if not np.all(np.isfinite(vals)):
                raise DomainError(f"{self.describe()} is not finite on [0, {self.t_max}]")
            if self.role == "nonnegative" and np.min(vals) < 0:
                raise DomainError(f"{self.describe()} must be >= 0 (min {np.min(vals):.3g})")
            if self.role == "nonpositive" and np.max(vals) > 0:
                raise DomainError(f"{self.describe()} must be <= 0 (max {np.max(vals):.3g})")

    # constructors -----------------------------------------------------

    @classmethod
    def constant(cls, c: float, t_max: float = np.inf, role: str | None = None) -> "TimeFunction":
        c = float(c)
        t_max = 1e300 if np.isinf(t_max) else t_max

        def fn(t):
            return np.full(np.shape(t), c) if np.ndim(t) else c

        return cls("constant", t_max, fn, value=c, role=role)

    @classmethod
    def piecewise_linear(
        cls, knots: Sequence[tuple[float, float]], role: str | None = None
    ) -> "TimeFunction":
        knots = tuple(sorted((float(a), float(b)) for a, b in knots))
        if len(knots) < 2:
            raise ValueError("piecewise_linear needs at least two knots")
        ts = np.array([k[0] for k in knots])
        vs = np.array([k[1] for k in knots])
        if ts[0] != 0.0:
            raise DomainError("first knot must sit at t = 0")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("knot times must be strictly increasing")

        def fn(t):
            out = np.interp(t, ts, vs)
            return out if np.ndim(t) else float(out)

        return cls("piecewise_linear", float(ts[-1]), fn, knots=knots, role=role)

    @classmethod
    def expression(cls, source: str, t_max: float = 100.0, role: str | None = None) -> "TimeFunction":
        tree = _expr.parse(source)
        compiled = _expr.compile_node(tree)

        def fn(t):
            with np.errstate(all="ignore"):
                out = compiled(np.asarray(t, dtype=float))
            return np.asarray(out, dtype=float) if np.ndim(t) else float(out)

        return cls("expression", t_max, fn, source=source, tree=tree, role=role)

    @classmethod
    def from_callable(cls, fn: Callable, t_max: float, name: str = "callable", role: str | None = None):
        """Wrap an arbitrary vectorised callable (used for fixed catalog profiles)."""
        return cls("callable", t_max, fn, source=name, role=role)

    # evaluation -------------------------------------------------------

    def __call__(self, t):
        return self._fn(t)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where the function may fail to be smooth."""
        return tuple(k for k, _ in self.knots[1:-1])

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value!r})"
        if self.kind == "piecewise_linear":
            return f"piecewise_linear({list(self.knots)})"
        return f"{self.kind}({self.source!r})"

    def to_json(self):
        if self.kind == "constant":
            return self.value
        if self.kind == "piecewise_linear":
            return [list(k) for k in self.knots]
        return self.source


def parse_time_function(source: str, role: str | None = None, t_max: float = 100.0) -> TimeFunction:
    """Parse a time expression; plain numbers become constant functions."""
    tree = _expr.parse(source)
    if isinstance(tree, _expr.Num):
        return TimeFunction.constant(tree.value, role=role)
    if isinstance(tree, _expr.Neg) and isinstance(tree.operand, _expr.Num):
        return TimeFunction.constant(-tree.operand.value, role=role)
    return TimeFunction.expression(source, t_max=t_max, role=role)


def as_time_function(value, role: str | None = None) -> TimeFunction:
    """Accept a number, an expression string or an existing TimeFunction."""
    if isinstance(value, TimeFunction):
        if role is not None and value.role != role:
            return TimeFunction(value.kind, value.t_max, value._fn, value.value, value.knots,
                                value.source, value.tree, role)
        return value
    if isinstance(value, str):
        return parse_time_function(value, role=role)
    if isinstance(value, (list, tuple)):
        return TimeFunction.piecewise_linear(value, role=role)
    return TimeFunction.constant(float(value), role=role)
