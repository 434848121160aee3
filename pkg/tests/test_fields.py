import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from equipart.fields import (
    ClosedFormError,
    Grid,
    Partials,
    ResidualReport,
    SaturatedResidualError,
    ScalarField,
    VectorField,
    adaptive_simpson,
    antiderivative,
    as_expr,
    convergence_order,
    cos,
    cosh,
    eval_closed_form,
    evaluate_on,
    exp,
    fd_derivative,
    fd_partial,
    fornberg_weights,
    from_json,
    parse,
    sin,
    sqrt,
    tanh,
    to_json,
    var,
)

X, Y, Z = sp.symbols("x y z")
x, y, z = var(0), var(1), var(2)

CASES = [
    (sin(x) * cosh(y) + tanh(x * y), sp.sin(X) * sp.cosh(Y) + sp.tanh(X * Y)),
    (exp(-(x * x + y * y)) / (2.0 + cos(x - y)), sp.exp(-(X**2 + Y**2)) / (2 + sp.cos(X - Y))),
    (sqrt(1.0 + x * x + y * y + z * z) * sin(z), sp.sqrt(1 + X**2 + Y**2 + Z**2) * sp.sin(Z)),
    ((x - 2.0 * y) ** 3 / (3.0 + z * z), (X - 2 * Y) ** 3 / (3 + Z**2)),
]
DERIVS = [(0,), (1,), (0, 0), (0, 1), (1, 1, 2), (0, 0, 0), (2, 2)]


@pytest.mark.parametrize("case", range(len(CASES)))
def test_closed_form_derivatives_match_sympy(case):
    e, s = CASES[case]
    pts = np.random.default_rng(case).uniform(-1, 1, size=(3, 50))
    syms = (X, Y, Z)
    for axes in DERIVS:
        ds = sp.diff(s, *[syms[a] for a in axes])
        f = sp.lambdify(syms, ds, "numpy")
        want = np.broadcast_to(f(*pts), pts[0].shape)
        got = np.broadcast_to(e.derivative(axes).evaluate({0: pts[0], 1: pts[1], 2: pts[2]}), pts[0].shape)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_derivative_is_order_independent():
    e = CASES[0][0]
    assert e.derivative((0, 1, 0)) is e.derivative((1, 0, 0))


def test_json_and_parse_round_trip():
    e = parse("tanh((x + y)/sqrt(2)) - 0.5*t + sech(z)**2")
    d = json.loads(json.dumps(to_json(e)))
    pts = {0: 0.3, 1: -0.2, 2: 0.7, 3: 1.5}
    assert from_json(d).evaluate(pts) == pytest.approx(e.evaluate(pts), abs=1e-15)
    s = math.tanh(0.1 / math.sqrt(2)) - 0.75 + 1 / math.cosh(0.7) ** 2
    assert e.evaluate(pts) == pytest.approx(s, abs=1e-14)


def test_parse_rejects_unknown_names():
    with pytest.raises(ClosedFormError):
        parse("foo(x)")
    with pytest.raises(ClosedFormError):
        from_json({"op": "bessel", "args": [0.0]})


def test_division_by_zero_reports_location():
    g = Grid.cube(2, -1.0, 1.0, 5)
    with pytest.raises(ClosedFormError, match=r"\(0\.0, 0\.0\)"):
        evaluate_on(1.0 / (x * x + y * y), g)


def test_antiderivative_exact_and_quadrature():
    t = var(3)
    A = antiderivative(cos(2.0 * t))
    assert A.evaluate({3: 0.7}) == pytest.approx(math.sin(1.4) / 2, abs=1e-15)
    B = antiderivative(exp(-t * t))
    assert B.evaluate({3: 0.0}) == 0.0
    assert B.evaluate({3: 1.0}) == pytest.approx(math.sqrt(math.pi) / 2 * math.erf(1.0), abs=1e-12)
    assert B.diff(3).evaluate({3: 0.4}) == pytest.approx(math.exp(-0.16))
    assert adaptive_simpson(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, abs=1e-13)


def test_fornberg_weights_known_stencils():
    np.testing.assert_allclose(fornberg_weights(2, (-1.0, 0.0, 1.0)), [1, -2, 1], atol=1e-14)
    np.testing.assert_allclose(fornberg_weights(1, (-2.0, -1.0, 0.0, 1.0, 2.0)),
                               [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12], atol=1e-14)
    np.testing.assert_allclose(fornberg_weights(1, (0.0, 1.0, 2.0)), [-1.5, 2, -0.5], atol=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.sampled_from([2, 4]), st.sampled_from([1, 2, 3]))
def test_stencils_exact_on_low_degree_polynomials(c, acc, order):
    """Order-``d`` stencils of accuracy ``p`` differentiate degree ``d + p - 1`` exactly."""
    deg = min(order + acc - 1, 3)
    g = Grid((-1.0,), (2.0,), (17,))
    s = sp.Symbol("s")
    poly = sum(ci * s**i for i, ci in enumerate(c[: deg + 1]))
    f = sp.lambdify(s, poly)(g.axis(0)) * np.ones(17)
    d = sp.lambdify(s, sp.diff(poly, s, order))(g.axis(0)) * np.ones(17)
    got = fd_partial(f, g, (0,) * order, acc)
    np.testing.assert_allclose(got, d, atol=1e-9 * (1 + np.max(np.abs(c))))


def _lap_levels(acc):
    e = sin(x) * sin(y)
    out = []
    for n in (21, 41, 81):
        g = Grid.cube(2, 0.0, 2.0, n)
        p = Partials(ScalarField(g, evaluate_on(e, g)), accuracy=acc)
        out.append((g.h_max, float(np.max(np.abs(p.laplacian() + 2 * evaluate_on(e, g))))))
    return out


def test_laplacian_convergence_slope_two():
    assert convergence_order(_lap_levels(2)) == pytest.approx(2.0, abs=0.1)


def test_laplacian_convergence_slope_four():
    assert convergence_order(_lap_levels(4)) == pytest.approx(4.0, abs=0.3)


@pytest.mark.parametrize("axes,acc", [((0,), 2), ((0, 0), 2), ((0, 0, 0), 4), ((0, 1, 1), 4), ((0, 0, 1), 2)])
def test_fd_matches_closed_form_at_stated_order(axes, acc):
    e = exp(0.5 * x) * cos(y) + tanh(x - 0.3 * y)
    levels = []
    for n in (21, 41, 81):
        g = Grid.cube(2, -1.0, 1.0, n)
        exact = eval_closed_form(e, g, [axes.count(0), axes.count(1)]).values
        levels.append((g.h_max, float(np.max(np.abs(fd_partial(evaluate_on(e, g), g, axes, acc) - exact)))))
    assert convergence_order(levels) == pytest.approx(acc, abs=0.3)


def test_periodic_derivative_is_spectrally_consistent():
    g = Grid((0.0,), (2 * math.pi,), (64,), (True,))
    f = ScalarField(g, np.sin(3 * g.axis(0)))
    d = fd_derivative(f, 0, 1, 4)
    assert np.max(np.abs(d.values - 3 * np.cos(3 * g.axis(0)))) < 5e-3


def test_convergence_order_saturation_and_errors():
    with pytest.raises(SaturatedResidualError):
        convergence_order([(0.1, 1e-15), (0.05, 1e-16), (0.025, 2e-16)])
    with pytest.raises(ValueError):
        convergence_order([(0.1, 1.0), (0.05, 0.25)])


def test_grid_and_field_validation():
    with pytest.raises(ValueError):
        Grid((0.0,), (0.0,), (5,))
    with pytest.raises(ValueError):
        Grid((0.0,) * 4, (1.0,) * 4, (4,) * 4)
    g = Grid.cube(2, 0.0, 1.0, 5)
    with pytest.raises(ValueError):
        VectorField(g, np.zeros((4, 5, 5)))
    with pytest.raises(ValueError):
        ScalarField(g, np.full((5, 5), np.nan))
    assert Grid.from_dict(g.to_dict()) == g


def test_report_round_trip_and_combine(square):
    a = ResidualReport.of("a", np.full(square.shape, 2e-3), square)
    b = ResidualReport.of("b", np.zeros(square.shape), square)
    c = ResidualReport.combine("ab", [a, b]).with_order(2.0)
    assert c.linf == 2e-3 and not c.passed() and c.passed(1e-2)
    assert ResidualReport.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_as_expr_and_constant_folding():
    assert (as_expr(2.0) * 3.0).evaluate({}) == 6.0
    assert (x - x).evaluate({0: np.arange(3.0)}) == pytest.approx(0.0)
