import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkmatch.errors import (
    BlowUpError,
    BracketError,
    DomainError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
)
from fkmatch.numerics import (
    QuadratureConfig,
    RngStream,
    TimeFunction,
    bessel_i0,
    bessel_i0e,
    bessel_i0e_vec,
    cumulative_integral,
    find_root_brent,
    integrate,
    normal_block,
    parse,
    parse_time_function,
    pretty,
    solve_ode_rk4,
)
from fkmatch.numerics.expr import compile_node
from fkmatch.numerics.quadrature import gauss_legendre_rule


# --- expressions ---------------------------------------------------------------

@pytest.mark.parametrize(
    "source, t, expected",
    [("1", 3.7, 1.0), ("t*t", 2.0, 4.0), ("1+0.5*sin(t)", 0.0, 1.0),
     ("2^3^2", 0.0, 512.0), ("-t^2", 3.0, -9.0), ("2^-t", 1.0, 0.5),
     (" ( 1 + t ) / 4 ", 3.0, 1.0), ("exp(log(t))", 2.5, 2.5), ("sqrt(t) - cos(0)", 9.0, 2.0),
     ("1.5e1 - 1E-1*t", 10.0, 14.0)],
)
def test_parse_evaluate(source, t, expected):
    assert parse_time_function(source)(t) == pytest.approx(expected, rel=1e-15)


def test_whitespace_insensitive():
    assert parse("1+ 2*t") == parse("  1 +2 * t")


@pytest.mark.parametrize("source, position", [("1 + * t", 4), ("(1+t", 4), ("2 $ t", 2), ("t t", 2)])
def test_syntax_error_position(source, position):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(source)
    assert info.value.position == position


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("1 + x")
    assert info.value.name == "x" and info.value.position == 4


def test_role_checks():
    parse_time_function("1 + t", role="nonnegative")
    parse_time_function("-1 - t", role="nonpositive")
    with pytest.raises(DomainError):
        parse_time_function("sin(t)", role="nonnegative")
    with pytest.raises(DomainError):
        parse_time_function("0.5", role="nonpositive")


def test_piecewise_linear_breakpoints():
    tf = TimeFunction.piecewise_linear([(0, 1), (1, 3), (2, 3)], role="nonnegative")
    assert tf(0.5) == pytest.approx(2.0)
    assert tf(1.5) == pytest.approx(3.0)
    assert 1.0 in tf.breakpoints


_leaf = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(repr),
    st.just("t"),
)


def _extend(children):
    binary = st.tuples(children, st.sampled_from("+-*/^"), children).map(lambda p: f"({p[0]}{p[1]}{p[2]})")
    call = st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt", "log"]), children).map(
        lambda p: f"{p[0]}({p[1]})")
    neg = children.map(lambda c: f"-{c}")
    return st.one_of(binary, call, neg)


expressions = st.recursive(_leaf, _extend, max_leaves=12)


@given(expressions)
@settings(max_examples=300, deadline=None)
def test_pretty_round_trip(source):
    tree = parse(source)
    assert parse(pretty(tree)) == tree


@given(expressions, st.floats(0.0, 5.0))
@settings(max_examples=200, deadline=None)
def test_pretty_preserves_value(source, t):
    tree = parse(source)
    with np.errstate(all="ignore"):
        a = compile_node(tree)(t)
        b = compile_node(parse(pretty(tree)))(t)
    assert np.array_equal(a, b, equal_nan=True)


# --- quadrature -------------------------------------------------------------------

def test_integrate_trivial():
    assert integrate(lambda u: np.ones_like(u), 0, 1) == pytest.approx(1.0, abs=1e-14)
    assert integrate(lambda u: u, 0, 1) == pytest.approx(0.5, abs=1e-14)


def test_integrate_log_three():
    delta, lam = 2.0, 1.0
    val = integrate(lambda u: delta / (1 + 2 * lam * u), 0, 1)
    assert val == pytest.approx(delta / (2 * lam) * math.log(3.0), abs=1e-9)


def test_integrate_scalar_only_callable():
    assert integrate(lambda u: math.exp(u), 0, 1) == pytest.approx(math.e - 1, abs=1e-9)


@pytest.mark.parametrize("n", [2, 5, 16, 32])
def test_gauss_legendre_exact_on_polynomials(n):
    rng = np.random.default_rng(n)
    coeffs = rng.normal(size=2 * n)  # degree 2n - 1
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(1.7) - poly.integ()(-0.3)
    val = integrate(poly, -0.3, 1.7, QuadratureConfig("gauss_legendre", n=n))
    assert val == pytest.approx(exact, rel=1e-13, abs=1e-13)


def test_gauss_legendre_not_exact_beyond_degree():
    x, w = gauss_legendre_rule(3)
    assert abs(np.sum(w * x**6) - 2 / 7) > 1e-6


def test_cumulative_integral_with_breakpoint():
    f = lambda u: np.where(u < 1.0, 1.0, 2.0)
    out = cumulative_integral(f, [0.5, 1.0, 2.0], breakpoints=(1.0,))
    np.testing.assert_allclose(out, [0.5, 1.0, 3.0], atol=1e-14)


def test_quadrature_config_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=0.0)


# --- ODE ---------------------------------------------------------------------------

def test_rk4_constant():
    assert solve_ode_rk4(lambda t, y: 0.0, 5.0, 0, 1, 10).y_end == 5.0


def test_rk4_besq_characteristic():
    path = solve_ode_rk4(lambda t, y: -2 * y * y, 1.0, 0, 1, 1000)
    assert path.y_end == pytest.approx(1 / 3, abs=1e-12)


def test_rk4_order():
    exact = 1 / 3
    errs = [abs(solve_ode_rk4(lambda t, y: -2 * y * y, 1.0, 0, 1, n).y_end - exact) for n in (10, 20, 40)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(3.5 <= p <= 4.5 for p in orders)


def test_rk4_against_riccati_closed_form():
    # y' = 2y^2 - 2a^2 with a = 1: y = a (1 - k e^{4at}) / (1 + k e^{4at}), k = (a - y0)/(a + y0)
    a, y0, t = 1.0, 0.5, 0.3
    k = (a - y0) / (a + y0)
    closed = a * (1 - k * math.exp(4 * a * t)) / (1 + k * math.exp(4 * a * t))
    num = solve_ode_rk4(lambda s, y: 2 * y * y - 2 * a * a, y0, 0, t, 2000).y_end
    assert num == pytest.approx(closed, abs=1e-8)


def test_rk4_backward_inverts_forward():
    rhs = lambda t, y: -2 * y * y + math.sin(t) * y
    fwd = solve_ode_rk4(rhs, 0.7, 0.0, 1.0, 4000).y_end
    back = solve_ode_rk4(rhs, fwd, 1.0, 0.0, 4000).y_end
    assert back == pytest.approx(0.7, abs=1e-10)


def test_rk4_vector_state():
    path = solve_ode_rk4(lambda t, y: -2 * y * y, np.array([1.0, 0.5]), 0, 1, 1000)
    np.testing.assert_allclose(path.y_end, [1 / 3, 0.25], atol=1e-12)


def test_rk4_blowup_reports_last_point():
    with pytest.raises(BlowUpError) as info:
        solve_ode_rk4(lambda t, y: y * y, 1.0, 0, 2, 2000)
    err = info.value
    assert 0.9 < err.t < 1.1 and np.isfinite(err.y)
    assert err.t_blowup == pytest.approx(1.0, abs=0.05)


# --- Bessel I0 -----------------------------------------------------------------------

def _i0_series(z, terms=200):
    mpmath.mp.dps = 50
    q = mpmath.mpf(z) ** 2 / 4
    return mpmath.fsum(q**k / mpmath.factorial(k) ** 2 for k in range(terms))


@pytest.mark.parametrize("z", [0.0, 1.0, 10.0, 0.37, 25.0])
def test_bessel_i0_against_series(z):
    assert bessel_i0(z) == pytest.approx(float(_i0_series(z)), rel=1e-14)


def test_bessel_i0_known_values():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(1.0) == pytest.approx(1.2660658, abs=1e-7)
    assert bessel_i0(10.0) == pytest.approx(2815.7166, abs=1e-4)


@given(st.floats(0.0, 700.0))
@settings(max_examples=100, deadline=None)
def test_bessel_i0e_scaling(z):
    mpmath.mp.dps = 30
    expected = float(mpmath.besseli(0, z) * mpmath.exp(-z))
    assert bessel_i0e(z) == pytest.approx(expected, rel=1e-13)


def test_bessel_rejects_negative():
    with pytest.raises(ValueError):
        bessel_i0(-1.0)
    with pytest.raises(ValueError):
        bessel_i0e_vec(np.array([1.0, -0.1]))


# --- roots -------------------------------------------------------------------------------

@pytest.mark.parametrize(
    "f, root",
    [(lambda x: x - 1, 1.0), (lambda x: x * x - 2, math.sqrt(2)), (lambda x: math.exp(x) - 3, math.log(3))],
)
def test_brent(f, root):
    assert find_root_brent(f, 0.0, 2.0) == pytest.approx(root, abs=1e-12)


def test_brent_needs_bracket():
    with pytest.raises(BracketError):
        find_root_brent(lambda x: x * x + 1, -1, 1)


# --- RNG ---------------------------------------------------------------------------------

def test_stream_reproducible():
    a = RngStream(42, 7).normal(1000)
    b = RngStream(42, 7).normal(1000)
    assert np.array_equal(a, b)


def test_streams_distinct():
    a = RngStream(42, 7).normal(1000)
    b = RngStream(42, 8).normal(1000)
    c = RngStream(43, 7).normal(1000)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15


def test_split_draws_match_single_draw():
    s1, s2 = RngStream(5, 3), RngStream(5, 3)
    whole = s1.normal(1000)
    parts = np.concatenate([s2.normal(300), s2.normal(700)])
    assert np.array_equal(whole, parts)


def test_normal_block_rows_are_streams():
    block = normal_block(11, 100, 4, 50)
    for i in range(4):
        assert np.array_equal(block[i], RngStream(11, 100 + i).normal(50))


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40))
@settings(max_examples=50, deadline=None)
def test_stream_kth_variate_independent_of_batching(seed, index):
    full = RngStream(seed, index).normal(64)
    s = RngStream(seed, index)
    pieces = [s.normal(k) for k in (1, 15, 48)]
    assert np.array_equal(full, np.concatenate(pieces))
