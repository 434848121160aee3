import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from equipart.eikonal_euler import (
    EikonalSolution,
    EulerField,
    GeneralizedEqSpec,
    MonotonicityError,
    UnsupportedDimensionError,
    VanishingGradientError,
    divergence_equivalence_check,
    divergence_y,
    eikonal_to_euler,
    euler_residual,
    mean_curvature,
    ratio_field,
    reconstruct_eikonal_2d,
    theorem1_pipeline,
    unit_gradient_residual,
)
from equipart.fields import Grid, as_expr, evaluate_on, exp, sqrt, tanh, var

x, y, z = var(0), var(1), var(2)
UPPER = Grid((-1.0, -1.0, 0.5), (1.0, 1.0, 2.5), (11, 11, 11))
PLANE = Grid.cube(2, -1.0, 1.0, 21)
r = sqrt(x * x + y * y + z * z)


def test_vertical_coordinate_gives_zero_field():
    F = eikonal_to_euler(EikonalSolution(y, 1.0, PLANE))
    assert np.all(F.values()[0] == 0)
    assert euler_residual(F).linf == 0


def test_sphere_distance_gives_burgers_field():
    F = eikonal_to_euler(EikonalSolution(r, 1.0, UPPER))
    X, Y, Z = UPPER.mesh
    np.testing.assert_allclose(F.values()[0], X / Z, atol=1e-15)
    np.testing.assert_allclose(F.values()[1], Y / Z, atol=1e-15)
    assert euler_residual(F).linf <= 1e-10


def test_sphere_euler_residual_matches_symbolic_oracle():
    X, Y, Z = sp.symbols("x y z", positive=True)
    R = sp.sqrt(X**2 + Y**2 + Z**2)
    F1, F2 = sp.diff(R, X) / sp.diff(R, Z), sp.diff(R, Y) / sp.diff(R, Z)
    res = sp.diff(F1, Z) + F1 * sp.diff(F1, X) + F2 * sp.diff(F1, Y)
    assert sp.simplify(res) == 0


def test_exponential_solution_with_quadratic_G():
    v = exp(x + y)
    sol = EikonalSolution(v, 2.0 * var(0) * var(0), PLANE, time_axis=1)
    assert sol.eikonal_residual().linf <= 1e-10 * float(np.max(evaluate_on(v * v, PLANE)))
    F = eikonal_to_euler(sol, tol=1e-9)
    assert np.allclose(F.values()[0], 1.0)
    assert euler_residual(F).linf == 0


def test_non_eikonal_input_is_rejected():
    with pytest.raises(ValueError, match="not an Eikonal"):
        eikonal_to_euler(EikonalSolution(x * x + y, 1.0, PLANE))


def test_shear_negative_control():
    F = EulerField((x,), PLANE, 1)
    assert euler_residual(F).linf == pytest.approx(1.0)


def test_burgers_field_sampled_and_analytic():
    g = Grid((-1.0, 1.0), (1.0, 3.0), (41, 41))
    F = EulerField((x / y,), g, 1)
    assert euler_residual(F).linf <= 1e-14
    Fs = ratio_field(sqrt(x * x + y * y), g)
    assert euler_residual(Fs).linf <= 1e-14


def test_monotonicity_is_required():
    with pytest.raises(MonotonicityError):
        ratio_field(x + y * y, PLANE)


@given(st.floats(-3, 3))
def test_reconstruct_constant_field(c):
    g = Grid((-1.0, 0.0), (1.0, 2.0), (21, 21))
    v = reconstruct_eikonal_2d(EulerField((as_expr(c),), g, 1), (c / math.sqrt(c * c + 1)) * var(0))
    X, Y = g.mesh
    np.testing.assert_allclose(v.values, (Y + c * X) / math.sqrt(c * c + 1), atol=1e-12)
    assert unit_gradient_residual(v).linf <= 1e-10


def test_reconstruct_burgers_without_base_line():
    g = Grid((-1.0, 1.0), (1.0, 3.0), (201, 201))
    v = reconstruct_eikonal_2d(EulerField((x / y,), g, 1))
    assert unit_gradient_residual(v).linf < 1e-6


def test_reconstruct_needs_two_dimensions():
    with pytest.raises(UnsupportedDimensionError):
        reconstruct_eikonal_2d(EulerField((x, y), UPPER, 2))


def test_mean_curvature_examples():
    assert np.max(np.abs(mean_curvature(2 * x - y + 3 * z + 1, UPPER).values)) <= 1e-14
    R = evaluate_on(r, UPPER)
    np.testing.assert_allclose(mean_curvature(r, UPPER).values, 2 / R, atol=1e-12)
    assert np.max(np.abs(mean_curvature(tanh((x + y) / 2), PLANE).values)) <= 1e-14
    with pytest.raises(VanishingGradientError):
        mean_curvature(x * x + y * y, PLANE)


def test_divergence_equivalence_examples():
    e = divergence_equivalence_check(tanh((x + y) / 2), PLANE)
    assert e.consistent and e.divergence.linf <= 1e-10 and e.curvature.linf <= 1e-10
    s = divergence_equivalence_check(r, UPPER)
    assert s.consistent and s.divergence.linf == pytest.approx(4.0) and s.curvature.linf == pytest.approx(4.0)
    F = ratio_field(r, UPPER)
    np.testing.assert_allclose(divergence_y(F), 2 / UPPER.mesh[2], atol=1e-12)
    assert divergence_equivalence_check(y, PLANE).divergence.linf == 0


def _note_spec(Phi):
    u = var(0)
    W = (1.0 - u * u) ** 2 / 4.0
    return GeneralizedEqSpec(a=1.0, b=0.0, f=W.diff(0), k=0.0, l=0.5, g=W, Phi=Phi)


def test_generalized_pipeline_recovers_equipartition():
    spec = _note_spec(var(0))
    assert spec.p().evaluate({0: 0.3}) == pytest.approx(-0.5)
    assert spec.G().evaluate({0: 0.4}) == pytest.approx(2 * ((1 - 0.16) ** 2 / 4))
    res = theorem1_pipeline(spec, tanh((x + y) / 2.0), PLANE)
    for rep in res.reports():
        assert rep.linf <= 1e-10, rep.name


def test_generalized_pipeline_negative_control():
    res = theorem1_pipeline(_note_spec(2.0 * var(0)), tanh((x + y) / 2.0), PLANE)
    assert res.div_ode.linf > 1.0


def test_generalized_pipeline_rejects_vanishing_link():
    with pytest.raises(ValueError, match="vanishes at t = 0"):
        theorem1_pipeline(_note_spec(var(0) * var(0)), tanh((x + y) / 2.0), PLANE)


@given(st.floats(0, 2 * math.pi), st.floats(0.2, 1.2), st.floats(-1, 1))
def test_random_direction_linear_solutions(theta, phi, c):
    """Unit-speed linear functions give constant Euler fields with zero residual."""
    d = (math.sin(phi) * math.cos(theta), math.sin(phi) * math.sin(theta), math.cos(phi))
    v = d[0] * x + d[1] * y + d[2] * z + c
    F = eikonal_to_euler(EikonalSolution(v, 1.0, UPPER))
    assert euler_residual(F).linf <= 1e-10
    assert divergence_equivalence_check(v, UPPER).consistent
