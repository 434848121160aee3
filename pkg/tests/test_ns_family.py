import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from equipart.euler_family import EulerFamilySpec, build
from equipart.fields import Grid, as_expr, cos, exp, fornberg_weights, sin, var
from equipart.flows import analytic_residual
from equipart.ns_family import (
    KERNEL_FLAG,
    NSFamilySpec,
    PreflightError,
    generate_ivp,
    generate_ns2d,
    generate_ns3d,
    heat_solve_1d,
    ivp_limit_check,
    ns2d_flow,
    ns3d_profile_residual,
)

s, eta, t = var(0), var(1), var(3)
SQUARE = Grid.cube(2, -1.0, 1.0, 11)
CUBE = Grid.cube(3, -1.0, 1.0, 7)


@pytest.mark.parametrize("tt", [0.1, 0.01, 0.001, 1.0])
def test_heat_sine_mode(tt):
    pts = np.linspace(-4, 4, 41)
    g = heat_solve_1d(sin(s), 6.0, tt, pts)
    np.testing.assert_allclose(g.values, math.exp(-6 * tt) * np.sin(pts), atol=1e-8)


def test_heat_constant_and_linear():
    pts = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(heat_solve_1d(as_expr(2.5), 0.7, 3.0, pts).values, 2.5, atol=1e-13)
    np.testing.assert_allclose(heat_solve_1d(s, 0.7, 3.0, pts).values, pts, atol=1e-12)


def test_heat_rejects_bad_time():
    with pytest.raises(ValueError):
        heat_solve_1d(sin(s), 1.0, 0.0, [0.0])


@given(st.floats(0.05, 2.0), st.floats(0.2, 3.0))
def test_heat_solves_heat_equation(tt, mu):
    # Gaussian initial data has a closed-form evolution
    pts = np.linspace(-2, 2, 9)
    g = heat_solve_1d(exp(-s * s), mu, tt, pts).values
    q = 1 + 4 * mu * tt
    np.testing.assert_allclose(g, np.exp(-pts ** 2 / q) / math.sqrt(q), atol=1e-10)
    d = max(1e-5, tt / 100)
    offs = (-3.0, -2.0, -1.0, 1.0, 2.0, 3.0)
    gt = sum(w * heat_solve_1d(exp(-s * s), mu, tt + k * d, pts, nodes=256).values
             for k, w in zip(offs, fornberg_weights(1, offs))) / d
    x = sp.symbols("x")
    gss = sp.lambdify(x, sp.diff(sp.exp(-x ** 2 / q) / sp.sqrt(q), x, 2))(pts)
    assert np.max(np.abs(gt - mu * gss)) <= 1e-8


def test_ns2d_closed_examples():
    mu, c1, c2 = 1.0, 1.0, 0.0
    g = exp(-mu * (c1 ** 2 + 1) * t) * sin(s - c2 * t)
    res = generate_ns2d(NSFamilySpec("NS2D", mu=mu, c1=c1, c2=c2, g=g), SQUARE, 0.3)
    assert all(r.linf <= 1e-10 for r in res.reports())
    res = generate_ns2d(NSFamilySpec("NS2D", mu=0.4, c1=0.5, c2=2.0, g=as_expr(1.5)), SQUARE, 0.3)
    assert res.residual.linf == 0
    np.testing.assert_allclose(res.u.values[0], 0.5 * 1.5 + 2.0)
    g = exp(-0.2 * 1.25 * t) * sin(s - 0.3 * t)
    res = generate_ns2d(NSFamilySpec("NS2D", mu=0.2, c1=0.5, c2=0.3, g=g, a=1.0), SQUARE, 0.7)
    assert res.residual.linf <= 1e-10
    X, Y = SQUARE.mesh
    np.testing.assert_allclose(res.p.values, 0.5 * X + Y)


def test_ns2d_preflight_rejects_wrong_profile():
    with pytest.raises(PreflightError):
        generate_ns2d(NSFamilySpec("NS2D", mu=1.0, c1=1.0, c2=0.0, g=exp(-t) * sin(s)), SQUARE, 0.3)


def test_ns2d_from_initial_data():
    spec = NSFamilySpec("NS2D", mu=0.1, c1=0.5, c2=0.3, H=sin(s), a=0.2)
    res = generate_ns2d(spec, SQUARE, 0.5)
    assert res.residual.linf <= 1e-8
    assert res.flags["kernel_normalization"] == KERNEL_FLAG
    X, Y = SQUARE.mesh
    g = math.exp(-spec.mu_tilde * 0.5) * np.sin(X - 0.5 * Y - 0.3 * 0.5)
    np.testing.assert_allclose(res.u.values[1], g - 0.2 * 0.5, atol=1e-9)


def test_ns3d_mixed_term_symbolically():
    x, y, z, T, c1, c2, d1, d2, mu = sp.symbols("x y z t c1 c2 d1 d2 mu")
    S = x - (c2 * y + c1 * z) / (2 * c1 * c2)
    E = (c2 * y - c1 * z) / (2 * c1 * c2)
    a_, b_ = sp.symbols("a b")
    gsym = sp.exp(-T) * sp.sin(a_ * S + S * E) * sp.cos(b_ * E)  # a generic smooth probe
    u1 = gsym
    u = [u1, c1 * u1 + d1, c2 * u1 + d2]
    X = (x, y, z)
    mom = sp.diff(u1, T) + sum(u[j] * sp.diff(u1, X[j]) for j in range(3)) - mu * sum(sp.diff(u1, v, 2) for v in X)
    ss, ee = sp.symbols("s eta")
    gse = sp.exp(-T) * sp.sin(a_ * ss + ss * ee) * sp.cos(b_ * ee)
    q = 1 / (4 * c1 ** 2) + 1 / (4 * c2 ** 2)
    reduced = (sp.diff(gse, T) - (d1 / (2 * c1) + d2 / (2 * c2)) * sp.diff(gse, ss)
               + (d1 / (2 * c1) - d2 / (2 * c2)) * sp.diff(gse, ee)
               - mu * q * (sp.diff(gse, ss, 2) + sp.diff(gse, ee, 2)) - mu * sp.diff(gse, ss, 2)
               - mu * (c1 ** 2 - c2 ** 2) / (2 * c1 ** 2 * c2 ** 2) * sp.diff(gse, ss, ee))
    diff = mom - reduced.subs({ss: S, ee: E})
    vals = {c1: 0.7, c2: -1.3, d1: 0.4, d2: 0.9, mu: 0.3, a_: 1.1, b_: 0.6, x: 0.2, y: -0.5, z: 0.8, T: 0.4}
    assert abs(float(diff.subs(vals))) < 1e-12
    # without the mixed term the equation is wrong when c1^2 != c2^2
    mixed = (mu * (c1 ** 2 - c2 ** 2) / (2 * c1 ** 2 * c2 ** 2) * sp.diff(gse, ss, ee)).subs({ss: S, ee: E})
    assert abs(float(mixed.subs(vals))) > 1e-3
    # the package's reduced residual agrees with the sympy one
    spec = NSFamilySpec("NS3D", mu=0.3, c1=0.7, c2=-1.3, ct1=0.4, ct2=0.9,
                        g=exp(-t) * sin(1.1 * s + s * eta) * cos(0.6 * eta))
    rng = np.random.default_rng(0)
    for _ in range(5):
        sv, ev, tv = rng.normal(size=3)
        ours = float(ns3d_profile_residual(spec).evaluate({0: sv, 1: ev, 3: tv}))
        ref = float(reduced.subs({**vals, ss: sv, ee: ev, T: tv}))
        assert ours == pytest.approx(ref, abs=1e-12)


def test_ns3d_mode():
    g = exp(-0.2 * t) * sin(s) * cos(eta)
    res = generate_ns3d(NSFamilySpec("NS3D", mu=0.1, c1=1, c2=1, g=g), CUBE, 0.5)
    assert all(r.linf <= 1e-10 for r in res.reports())
    u = res.u.values
    assert np.max(np.abs(u[1] - u[0])) <= 1e-14 and np.max(np.abs(u[2] - u[0])) <= 1e-14
    res = generate_ns3d(NSFamilySpec("NS3D", mu=0.1, c1=1, c2=1, ct1=1, ct2=-1, g=as_expr(2.0)), CUBE, 0.5)
    assert res.residual.linf == 0
    with pytest.raises(ValueError, match="c1\\*c2"):
        generate_ns3d(NSFamilySpec("NS3D", mu=0.1, c1=0, c2=1, g=g), CUBE, 0.5)


def test_ns3d_reduction_to_heat():
    c1 = c2 = 1.0
    mu = 0.2
    kappa = mu * (0.25 + 0.25 + 1.0)
    g = exp(-kappa * t) * sin(s)
    spec = NSFamilySpec("NS3D", mu=mu, c1=c1, c2=c2, ct1=1.0, ct2=-1.0, g=g)
    res = generate_ns3d(spec, CUBE, 0.8)
    assert res.residual.linf <= 1e-10
    X, Y, Z = CUBE.mesh
    S = X - (Y + Z) / 2
    heat = heat_solve_1d(sin(s), kappa, 0.8, S).values
    np.testing.assert_allclose(res.u.values[0], heat, atol=1e-9)


def test_ivp_limit_matches_fourier_oracle():
    spec = NSFamilySpec("NS3D_IVP", mu=1.0, c1=1, c2=1, ct1=1, ct2=-1, H=sin(s))
    assert spec.mu_tilde == 6.0
    grid = Grid.cube(3, -math.pi / 4, math.pi / 4, 5)  # contains 2x - y - z = pi/2
    ts = (0.1, 0.01, 0.001)
    rep = ivp_limit_check(spec, grid, ts)
    for tt, err in zip(ts, rep.errors):
        assert err == pytest.approx(1 - math.exp(-6 * tt), abs=1e-8)
    assert rep.monotone
    assert all(r.linf <= 1e-8 for r in rep.residuals)
    assert rep.to_dict()["kernel_normalization"] == KERNEL_FLAG


def test_ivp_trivial_and_gaussian():
    zero = NSFamilySpec("NS3D_IVP", mu=1.0, c1=1, c2=2, ct1=2, ct2=-4, H=as_expr(0.0))
    rep = ivp_limit_check(zero, CUBE, (0.1, 0.01))
    assert rep.errors == (0.0, 0.0)
    res = generate_ivp(zero, CUBE, 0.1)
    np.testing.assert_array_equal(res.u.values[1], 2.0)
    bump = NSFamilySpec("NS3D_IVP", mu=0.5, c1=1, c2=1, ct1=0.5, ct2=-0.5, H=exp(-s * s))
    rep = ivp_limit_check(bump, CUBE, (0.2, 0.05, 0.01))
    assert rep.monotone and rep.errors[-1] < rep.errors[0]
    assert all(r.linf <= 1e-8 for r in rep.residuals)


def test_ivp_constraint():
    with pytest.raises(ValueError, match="ct1\\*c2"):
        ivp_limit_check(NSFamilySpec("NS3D_IVP", mu=1.0, c1=1, c2=1, ct1=1, ct2=1, H=sin(s)), CUBE, (0.1,))


def test_inviscid_limit_is_the_euler_family():
    c1, c2 = 0.5, 0.3
    flow = ns2d_flow(sin(s - c2 * t), c1, c2, mu=0.0)
    euler = build(EulerFamilySpec("E2D_ISOBARIC", c1=c1, c2=1.0, ct1=c2, ct2=0.0, beta=1.0, gamma=-c1,
                                  profiles={"g": sin(var(0))}))
    for tt in (0.0, 0.6):
        for a, b in zip(flow.sample(SQUARE, tt)[0].values, euler.sample(SQUARE, tt)[0].values):
            np.testing.assert_allclose(a, b, atol=1e-14)
    assert analytic_residual(flow, SQUARE, 0.6).linf <= 1e-12


def test_spec_json_round_trip():
    spec = NSFamilySpec("NS3D_IVP", mu=1.0, c1=1, c2=1, ct1=1, ct2=-1, H=sin(s), a=cos(t))
    again = NSFamilySpec.from_json(spec.to_json())
    assert again.to_json() == spec.to_json()
