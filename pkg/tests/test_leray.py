import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from equipart.ac_system import catalog_example
from equipart.fields import Grid, VectorField, as_expr, cos, evaluate_on, exp, sin, tanh, var
from equipart.leray import (
    SigmaFamilySpec,
    cross_identity_residual,
    dump_periodic,
    gradient_project,
    gradient_projection_check,
    helmholtz_decompose,
    l2_inner,
    leray_project,
    load_periodic,
    random_bandlimited,
    sigma_family,
    sigma_reports,
    spectral_divergence,
    wave_potential,
)

x, y = var(0), var(1)
TWO_PI = 2 * math.pi


def periodic(n=64):
    return Grid((0.0, 0.0), (TWO_PI, TWO_PI), (n, n), (True, True))


def field_of(exprs, grid):
    return VectorField(grid, np.stack([evaluate_on(as_expr(e), grid) for e in exprs]))


def test_pure_gradient_and_pure_curl():
    g = periodic()
    phi = sin(x) * sin(y)
    u = field_of((phi.diff(0), phi.diff(1)), g)
    d = helmholtz_decompose(u)
    assert np.max(np.abs(d.divfree_part.values)) <= 1e-12
    np.testing.assert_allclose(d.grad_part.values, u.values, atol=1e-12)
    w = field_of((-cos(y), 0.0), g)
    d = helmholtz_decompose(w)
    assert np.max(np.abs(d.grad_part.values)) <= 1e-12
    np.testing.assert_allclose(leray_project(w).values, w.values, atol=1e-12)


def test_projection_of_gradient_is_the_mean():
    g = periodic()
    u = field_of((cos(x) + 0.5, sin(y) - 2.0), g)
    p = leray_project(u).values
    np.testing.assert_allclose(p[0], 0.5, atol=1e-12)
    np.testing.assert_allclose(p[1], -2.0, atol=1e-12)


def test_random_fields_properties():
    rng = np.random.default_rng(7)
    g = periodic(128)
    for _ in range(20):
        u = random_bandlimited(g, rng)
        d = helmholtz_decompose(u)
        assert np.max(np.abs(d.recombine() - u.values)) <= 1e-12
        assert abs(l2_inner(d.grad_part, d.divfree_part)) <= 1e-12
        p = leray_project(u)
        assert np.max(np.abs(leray_project(p).values - p.values)) <= 1e-12
        assert np.max(np.abs(spectral_divergence(p))) <= 1e-10
        np.testing.assert_allclose(gradient_project(u).values, d.grad_part.values)


def test_non_periodic_input_rejected():
    g = Grid.cube(2, 0.0, 1.0, 16)
    with pytest.raises(ValueError, match="periodic"):
        helmholtz_decompose(VectorField(g, np.zeros((2, 16, 16))))
    g = Grid((0.0, 0.0), (1.0, 1.0), (24, 24), (True, True))
    with pytest.raises(ValueError, match="power-of-two"):
        leray_project(VectorField(g, np.zeros((2, 24, 24))))


def test_dump_round_trip(tmp_path):
    g = periodic(32)
    u = random_bandlimited(g, np.random.default_rng(1), kmax=4)
    path = tmp_path / "u.bin"
    dump_periodic(u, path)
    assert path.stat().st_size == 48 + 2 * 32 * 32 * 8
    v = load_periodic(path)
    assert v.grid.n == g.n and v.grid.periodic == (True, True)
    np.testing.assert_array_equal(v.values, u.values)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_periodic(path)


def test_cross_identity_on_ac_solution():
    sol = catalog_example("product-example1")
    g = Grid.cube(2, -2.0, 2.0, 21)
    assert cross_identity_residual(sol.u, g).linf <= 1e-10


def test_cross_identity_is_only_necessary():
    g = Grid.cube(2, -1.0, 1.0, 11)
    assert cross_identity_residual((x * x, y * y), g).linf == 0
    assert cross_identity_residual((3.0, -1.0), g).linf == 0
    assert cross_identity_residual((x ** 3 * y, x * y), g).linf > 1


def test_cross_identity_sampled_fourth_order():
    sol = catalog_example("product-example1")
    levels = []
    for n in (21, 41, 81):
        g = Grid.cube(2, -1.0, 1.0, n)
        u = VectorField(g, np.stack([evaluate_on(c, g) for c in sol.u]))
        levels.append((g.h_max, cross_identity_residual(u).linf))
    from equipart.fields import convergence_order
    assert convergence_order(levels) == pytest.approx(4.0, abs=0.3)


def test_sigma_family_symmetric_case():
    spec = SigmaFamilySpec(0.0, 1.0, F=tanh(x), G=sin(x))
    assert spec.c == 1.0 and spec.root_residual() == 0
    res = sigma_family(spec, Grid.cube(2, -2.0, 2.0, 21))
    for r in res.reports():
        assert r.linf <= 1e-10


def test_sigma_family_c2_zero():
    spec = SigmaFamilySpec(1.0, 0.0, A=sin(x), B=exp(x))
    g = Grid.cube(2, -1.0, 1.0, 11)
    res = sigma_family(spec, g)
    assert res.c is None
    assert all(r.linf == 0 for r in res.reports())
    X, Y = g.mesh
    np.testing.assert_allclose(res.v.values[0], -np.exp(Y))
    np.testing.assert_allclose(res.v.values[1], np.cos(X))
    with pytest.raises(ValueError):
        SigmaFamilySpec(1.0, 0.0, F=sin(x), G=sin(x))
    with pytest.raises(ValueError):
        SigmaFamilySpec(1.0, 0.0, A=sin(x))
    with pytest.raises(ValueError):
        SigmaFamilySpec(1.0, 2.0, F=sin(x))


def test_sigma_negative_control():
    lin, _ = sigma_reports(x * x * y, 1.3, -0.7, Grid.cube(2, -1.0, 1.0, 11))
    # c1 * 2x - c2 * 2y peaks at a corner
    assert lin.linf == pytest.approx(2 * 1.3 + 2 * 0.7)


PROFILES = [sin(x), tanh(x), cos(2 * x), x ** 3, exp(-x * x)]


@given(st.floats(-3, 3), st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3),
       st.sampled_from(range(5)), st.sampled_from(range(5)))
def test_linear_subclass_solves_sigma_equation(c1, c2, i, j):
    spec = SigmaFamilySpec(c1, c2, F=PROFILES[i], G=PROFILES[j])
    assert abs(spec.root_residual()) <= 1e-12 * max(1.0, spec.c ** 2 * abs(c2))
    res = sigma_family(spec, Grid.cube(2, -1.0, 1.0, 9))
    scale = max(1.0, spec.c ** 6)
    assert res.linear_report.linf <= 1e-10 * scale
    assert res.full_report.linf <= 1e-10 * scale ** 2
    assert res.printed_match.linf <= 1e-10 * scale


def test_leray_fixes_the_divergence_free_part():
    g = periodic()
    spec = SigmaFamilySpec(0.0, 1.0, F=sin(x), G=cos(x))
    res = sigma_family(spec, g)
    phi = sin(x) * cos(2 * y)
    u = VectorField(g, res.v.values + np.stack([evaluate_on(phi.diff(a), g) for a in (0, 1)]))
    np.testing.assert_allclose(leray_project(u).values, res.v.values, atol=1e-12)


def test_gradient_projection_examples():
    g = Grid.cube(2, -1.0, 1.0, 11)
    assert gradient_projection_check(wave_potential(tanh(x), sin(x)), g).linf <= 1e-10
    assert gradient_projection_check(x * x - 3 * x * y + y * y, g).linf == 0
    assert gradient_projection_check(x ** 4, g).linf == 0
    X, Y = sp.symbols("x y")
    phi = X ** 4 * Y
    lap = lambda e: sp.diff(e, X, 2) + sp.diff(e, Y, 2)
    dd, sxy = sp.diff(phi, X, 2) - sp.diff(phi, Y, 2), sp.diff(phi, X, Y)
    oracle = sp.lambdify((X, Y), sp.expand(dd * lap(sxy) - sxy * lap(dd)))
    Xg, Yg = g.mesh
    rep = gradient_projection_check(x ** 4 * y, g)
    assert rep.linf == pytest.approx(np.max(np.abs(oracle(Xg, Yg))), rel=1e-12)
    assert rep.linf == pytest.approx(192.0)
