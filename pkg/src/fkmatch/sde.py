"""Monte Carlo simulation of the catalogued diffusions.

Path ``i`` of a run draws every Gaussian increment from
``RngStream(master_seed, stream_base + i)`` and nothing else, so a path is
the same whichever chunk or worker computes it.  Per-path results are
collected in path order and reduced with ``np.sum`` (pairwise summation),
which makes estimates bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BudgetExceededError, DomainError, SimulationError
from .numerics.rng import RngStream
from .processes import (
    BAff,
    CoshBM,
    GBesqI,
    GeomAssoc,
    Jacobi,
    Pgsce,
    SquaredBesselBridge,
)

SCHEMES = ("euler_full_truncation", "euler_reciprocal", "exact_besq_terminal")
DEFAULT_BUDGET = 20_000_000_000
CHUNK_PATHS = 4096
BLOCK_ELEMS = 1 << 22  # normals held in memory per chunk
FLAG_LIMIT = 1e-3
JACOBI_CLIP = 1e-10


def step_budget() -> int:
    raw = os.environ.get("FKMATCH_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        return int(float(raw))
    except ValueError as exc:
        raise DomainError(f"FKMATCH_BUDGET must be a number, got {raw!r}") from exc


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt: float
    n_paths: int
    master_seed: int = 0
    scheme: str = "euler_full_truncation"
    stream_base: int = 0
    workers: int = 1
    budget: int | None = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise DomainError("t_end must be > 0")
        if not 0 < self.dt <= self.t_end:
            raise DomainError("need 0 < dt <= t_end")
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        cap = step_budget() if self.budget is None else self.budget
        if self.n_paths * self.n_steps > cap:
            raise BudgetExceededError(
                f"{self.n_paths} paths x {self.n_steps} steps exceeds the budget of {cap} steps"
            )

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def step(self) -> float:
        return self.t_end / self.n_steps

    def echo(self) -> dict:
        return {
            "t_end": self.t_end,
            "dt": self.dt,
            "n_paths": self.n_paths,
            "master_seed": self.master_seed,
            "scheme": self.scheme,
            "stream_base": self.stream_base,
        }


@dataclass(frozen=True)
class PathFunctional:
    """``exp(-(lam * terminal_map(X_t) + weight * I))`` or ``terminal_map(X_t) * exp(-weight * I)``.

    ``I = int_0^t integrand(u, X_u) du`` accumulated with the trapezoidal rule
    on the simulation grid.  Maps take numpy arrays.
    """

    terminal_map: Callable | None = None
    integrand: Callable | None = None
    lam: float = 1.0
    weight: float = 0.0
    combiner: str = "laplace"

    def __post_init__(self):
        if self.combiner not in ("laplace", "raw"):
            raise DomainError("combiner must be 'laplace' or 'raw'")

    def evaluate(self, terminal, integral):
        mapped = terminal if self.terminal_map is None else self.terminal_map(terminal)
        penalty = 0.0 if integral is None else self.weight * integral
        if self.combiner == "laplace":
            return np.exp(-(self.lam * mapped + penalty))
        return mapped * np.exp(-penalty)


def laplace_functional(lam: float) -> PathFunctional:
    return PathFunctional(lam=lam)


def joint_functional(lam: float, gamma: float) -> PathFunctional:
    return PathFunctional(integrand=_state, lam=lam, weight=gamma)


def _state(u, x):
    return x


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_paths: int
    master_seed: int
    dt: float
    scheme: str
    flagged: int = 0
    extras: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "master_seed": self.master_seed,
            "dt": self.dt,
            "scheme": self.scheme,
            "flagged": self.flagged,
        }
        if self.extras:
            out["extras"] = dict(self.extras)
        return out


@dataclass(frozen=True)
class PathRecord:
    terminal: float
    integral: float | None
    value: float


@dataclass(frozen=True)
class BrownianDriver:
    """The driving Brownian motion itself, usable as one side of ``paired_pathwise``."""

    x0: float = 0.0
    family = "brownian"


# steppers -------------------------------------------------------------------


class _Stepper:
    """State update plus the map from internal state to the observed process."""

    clip_count = 0

    def __init__(self, spec):
        self.spec = spec

    def init(self, n):
        return np.full(n, float(self.spec.x0))

    def observe(self, x):
        return x


class _FullTruncation(_Stepper):
    def __init__(self, spec, floor_at_zero=False):
        super().__init__(spec)
        self.floor = floor_at_zero

    def step(self, t, x, dw, dt):
        xp = np.maximum(x, 0.0)
        drift, diff = self.spec.drift_diffusion(t, xp)
        out = x + drift * dt + diff * dw
        return np.maximum(out, 0.0) if self.floor else out

    def observe(self, x):
        return np.maximum(x, 0.0)


class _Reciprocal(_Stepper):
    # Y = 1/X solves dY = (Y + c) dt - Y dB
    def init(self, n):
        return np.full(n, 1.0 / self.spec.x0)

    def step(self, t, y, dw, dt):
        return y + (y + self.spec.c) * dt - y * dw

    def observe(self, y):
        with np.errstate(divide="ignore"):
            return np.where(y > 0, 1.0 / y, np.nan)


class _Jacobi(_Stepper):
    def step(self, t, x, dw, dt):
        drift, diff = self.spec.drift_diffusion(t, x)
        return np.clip(x + drift * dt + diff * dw, 0.0, 1.0)

    def observe(self, x):
        clipped = np.clip(x, JACOBI_CLIP, 1.0 - JACOBI_CLIP)
        self.clip_count += int(np.count_nonzero(clipped != x))
        return clipped


class _Brownian(_Stepper):
    def init(self, n):
        return np.zeros(n)

    def step(self, t, b, dw, dt):
        return b + dw


class _Cosh(_Brownian):
    def observe(self, b):
        return np.cosh(b)


def default_scheme(spec) -> str:
    return "euler_reciprocal" if isinstance(spec, Pgsce) else "euler_full_truncation"


def _make_stepper(spec, scheme):
    if scheme == "euler_reciprocal":
        if not isinstance(spec, Pgsce):
            raise DomainError("euler_reciprocal applies to Pgsce only")
        return _Reciprocal(spec)
    if isinstance(spec, Pgsce):
        raise DomainError("Pgsce is simulated with scheme 'euler_reciprocal'")
    if isinstance(spec, CoshBM):
        return _Cosh(spec)
    if isinstance(spec, BrownianDriver):
        return _Brownian(spec)
    if isinstance(spec, Jacobi):
        return _Jacobi(spec)
    return _FullTruncation(spec, floor_at_zero=isinstance(spec, BAff))


def _check_compatible(spec, cfg: SimConfig, functional: PathFunctional | None):
    if isinstance(spec, SquaredBesselBridge) and cfg.t_end >= 1.0:
        raise DomainError("bridge simulation needs t_end < 1")
    if cfg.scheme == "exact_besq_terminal":
        if not (isinstance(spec, GBesqI) and spec.delta.is_constant):
            raise DomainError("exact_besq_terminal needs GBesqI with constant dimension")
        if functional is not None and functional.integrand is not None:
            raise DomainError("exact_besq_terminal samples the terminal value only")


# core kernels ---------------------------------------------------------------


def _draw_block(streams, m, sqdt):
    """Next ``m`` increments of every stream, laid out ``(m, count)`` for stepping."""
    buf = np.empty((len(streams), m))
    for row, s in zip(buf, streams):
        s.generator.standard_normal(out=row)
    return np.multiply(buf.T, sqdt, order="C")


def _simulate_streams(spec, cfg: SimConfig, functional: PathFunctional, streams, richardson=False):
    """Terminal values, integrals and functional values for a list of streams.

    With ``richardson`` a second path on the ``2 dt`` grid is driven by summed
    pairs of the same increments, and the value returned per path is
    ``2 * fine - coarse``, cancelling the first-order weak error.
    """
    count = len(streams)
    if cfg.scheme == "exact_besq_terminal":
        delta = float(spec.delta.value)
        terminal = np.array([sample_besq_terminal(delta, spec.x0, cfg.t_end, s) for s in streams])
        return terminal, None, functional.evaluate(terminal, None), 0

    stepper = _make_stepper(spec, cfg.scheme)
    n, dt = cfg.n_steps, cfg.step
    if richardson and n % 2:
        raise DomainError("Richardson extrapolation needs an even number of steps")
    sqdt = math.sqrt(dt)
    block = max(2, min(n, BLOCK_ELEMS // count))
    block -= block % 2
    x = stepper.init(count)
    xc = x.copy() if richardson else None
    integ = integ_c = None
    g_prev = gc_prev = None
    if functional.integrand is not None:
        integ = np.zeros(count)
        g_prev = functional.integrand(0.0, stepper.observe(x))
        if richardson:
            integ_c, gc_prev = np.zeros(count), g_prev
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, n, block):
            m = min(block, n - start)
            dws = _draw_block(streams, m, sqdt)
            for j in range(m):
                t = (start + j) * dt
                x = stepper.step(t, x, dws[j], dt)
                if integ is not None:
                    g = functional.integrand(t + dt, stepper.observe(x))
                    integ += 0.5 * dt * (g_prev + g)
                    g_prev = g
                if richardson and j % 2:
                    xc = stepper.step(t - dt, xc, dws[j - 1] + dws[j], 2 * dt)
                    if integ_c is not None:
                        gc = functional.integrand(t + dt, stepper.observe(xc))
                        integ_c += dt * (gc_prev + gc)
                        gc_prev = gc
        terminal = stepper.observe(x)
        values = np.asarray(functional.evaluate(terminal, integ), dtype=float)
        if richardson:
            values = 2.0 * values - functional.evaluate(stepper.observe(xc), integ_c)
    return terminal, integ, values, stepper.clip_count


def _chunks(n_paths, size):
    return [(lo, min(size, n_paths - lo)) for lo in range(0, n_paths, size)]


def _map_chunks(fn, chunks, workers):
    if workers == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _estimate(values, cfg: SimConfig, extras=None) -> MCEstimate:
    finite = np.isfinite(values)
    flagged = int(values.size - np.count_nonzero(finite))
    if flagged > FLAG_LIMIT * values.size:
        raise SimulationError(
            f"{flagged} of {values.size} paths produced non-finite values (limit {FLAG_LIMIT:.1%})"
        )
    good = values[finite] if flagged else values
    n = good.size
    mean = float(np.sum(good) / n)
    stderr = float(np.std(good, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean, stderr, n, cfg.master_seed, cfg.dt, cfg.scheme, flagged, extras or {})


def simulate_path(spec, cfg: SimConfig, stream: RngStream, functional: PathFunctional) -> PathRecord:
    """One path driven only by ``stream``; identical to that path inside ``mc_expectation``."""
    _check_compatible(spec, cfg, functional)
    terminal, integ, values, _ = _simulate_streams(spec, cfg, functional, [stream])
    return PathRecord(float(terminal[0]), None if integ is None else float(integ[0]), float(values[0]))


def mc_expectation(spec, functional: PathFunctional, cfg: SimConfig, richardson: bool = False) -> MCEstimate:
    """Monte Carlo mean of ``functional`` over ``cfg.n_paths`` independent paths.

    ``richardson=True`` pairs each path with a ``2 dt`` companion on the same
    noise and averages ``2 * fine - coarse``; the step count must be even.
    """
    _check_compatible(spec, cfg, functional)
    if richardson and cfg.scheme == "exact_besq_terminal":
        raise DomainError("Richardson extrapolation applies to time-stepping schemes")

    def run(chunk):
        lo, cnt = chunk
        streams = [RngStream(cfg.master_seed, cfg.stream_base + lo + i) for i in range(cnt)]
        _, _, values, clips = _simulate_streams(spec, cfg, functional, streams, richardson)
        return values, clips

    parts = _map_chunks(run, _chunks(cfg.n_paths, CHUNK_PATHS), cfg.workers)
    values = np.concatenate([p[0] for p in parts])
    extras = {"richardson": True} if richardson else {}
    if isinstance(spec, Jacobi):
        extras["clip_count"] = sum(p[1] for p in parts)
    return _estimate(values, cfg, extras)


def mc_brownian_functional(fn: Callable, cfg: SimConfig, n_bm: int = 1) -> MCEstimate:
    """Mean of ``fn(times, B)`` over Brownian paths sampled on the ``cfg`` grid.

    ``B`` has shape ``(count, n_steps + 1)`` for one motion or
    ``(n_bm, count, n_steps + 1)`` for several independent ones; ``fn``
    returns one value per path.
    """
    n, dt = cfg.n_steps, cfg.step
    times = np.linspace(0.0, cfg.t_end, n + 1)
    size = max(1, min(CHUNK_PATHS, BLOCK_ELEMS // (n_bm * (n + 1))))
    sqdt = math.sqrt(dt)

    def run(chunk):
        lo, cnt = chunk
        incs = np.empty((n_bm, cnt, n + 1))
        incs[:, :, 0] = 0.0
        for i in range(cnt):
            draws = RngStream(cfg.master_seed, cfg.stream_base + lo + i).normal(n_bm * n)
            incs[:, i, 1:] = draws.reshape(n_bm, n) * sqdt
        paths = np.cumsum(incs, axis=2)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.asarray(fn(times, paths[0] if n_bm == 1 else paths), dtype=float)

    values = np.concatenate(_map_chunks(run, _chunks(cfg.n_paths, size), cfg.workers))
    return _estimate(values, cfg)


def trapezoid_cumulative(times, values):
    """Running trapezoidal integral along the last axis, starting at 0."""
    dt = np.diff(times)
    inc = 0.5 * (values[..., 1:] + values[..., :-1]) * dt
    out = np.zeros_like(values)
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def trapezoid_total(times, values):
    dt = np.diff(times)
    return np.sum(0.5 * (values[..., 1:] + values[..., :-1]) * dt, axis=-1)


def sample_besq_terminal(delta: float, x0: float, t: float, stream: RngStream) -> float:
    """Exact BESQ draw: Poisson(x0/(2t))-mixed Gamma(delta/2 + N, scale 2t)."""
    if delta < 0 or x0 < 0 or not t > 0:
        raise DomainError("sample_besq_terminal needs delta >= 0, x0 >= 0, t > 0")
    n = stream.poisson(x0 / (2.0 * t)) if x0 > 0 else 0
    shape = 0.5 * delta + n
    if shape == 0:
        return 0.0
    return float(stream.gamma(shape, 2.0 * t))


@dataclass(frozen=True)
class PairedResult:
    max_sup: float
    mean_sup: float
    max_terminal: float
    mean_terminal: float
    n_paths: int

    def to_dict(self) -> dict:
        return {
            "max_sup": self.max_sup,
            "mean_sup": self.mean_sup,
            "max_terminal": self.max_terminal,
            "mean_terminal": self.mean_terminal,
            "n_paths": self.n_paths,
        }


def paired_pathwise(spec_a, map_a: Callable, spec_b, map_b: Callable, cfg: SimConfig) -> PairedResult:
    """Drive both specs with the same increments and measure ``|map_a - map_b|``.

    Maps take ``(t, x)`` with ``x`` the observed state.  The sup is over the
    simulation grid; the max/mean are over paths.
    """
    for spec in (spec_a, spec_b):
        _check_compatible(spec, cfg, None)
    n, dt = cfg.n_steps, cfg.step
    sqdt = math.sqrt(dt)

    def run(chunk):
        lo, cnt = chunk
        streams = [RngStream(cfg.master_seed, cfg.stream_base + lo + i) for i in range(cnt)]
        sa = _make_stepper(spec_a, default_scheme(spec_a))
        sb = _make_stepper(spec_b, default_scheme(spec_b))
        xa, xb = sa.init(cnt), sb.init(cnt)
        sup = np.abs(map_a(0.0, sa.observe(xa)) - map_b(0.0, sb.observe(xb)))
        block = max(1, min(n, BLOCK_ELEMS // cnt))
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, block):
                m = min(block, n - start)
                dws = _draw_block(streams, m, sqdt)
                for j in range(m):
                    t = (start + j) * dt
                    xa = sa.step(t, xa, dws[j], dt)
                    xb = sb.step(t, xb, dws[j], dt)
                    gap = np.abs(map_a(t + dt, sa.observe(xa)) - map_b(t + dt, sb.observe(xb)))
                    sup = np.maximum(sup, gap)
        return sup, gap

    parts = _map_chunks(run, _chunks(cfg.n_paths, CHUNK_PATHS), cfg.workers)
    sup = np.concatenate([p[0] for p in parts])
    term = np.concatenate([p[1] for p in parts])
    return PairedResult(
        float(sup.max()), float(np.sum(sup) / sup.size), float(term.max()), float(np.sum(term) / term.size), sup.size
    )
