"""Shared numerical kernels."""

from .expr import parse, pretty
from .ode import OdePath, solve_ode_rk4
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, cumulative_integral, integrate
from .rng import RngStream, normal_block
from .roots import find_root_brent
from .special import bessel_i0, bessel_i0e, bessel_i0e_vec
from .timefunc import TimeFunction, as_time_function, parse_time_function

__all__ = [
    "DEFAULT_QUADRATURE",
    "OdePath",
    "QuadratureConfig",
    "RngStream",
    "TimeFunction",
    "as_time_function",
    "bessel_i0",
    "bessel_i0e",
    "bessel_i0e_vec",
    "cumulative_integral",
    "find_root_brent",
    "integrate",
    "normal_block",
    "parse",
    "parse_time_function",
    "pretty",
    "solve_ode_rk4",
]
