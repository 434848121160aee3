"""From Eikonal-type scalar equations to pressureless Euler fields.

For ``v`` with ``v_{x_n} > 0`` the ratios ``F_i = v_{x_i} / v_{x_n}`` solve
``F_{x_n} + F . grad_y F = 0`` whenever ``|grad v|^2 = G(v)``.  This module
builds that field, checks it, inverts the map in two dimensions, and runs the
generalised two-equation pipeline whose divergence condition is an ODE in the
link function.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import cumulative_simpson

from .fields import (
    ANALYTIC_TOL,
    ClosedForm,
    Grid,
    Partials,
    ResidualReport,
    ScalarField,
    as_expr,
    evaluate_on,
    first_point,
    sample,
    sqrt,
)

MONOTONE_MARGIN = 1e-8
GRADIENT_FLOOR = 1e-8
ODE_POINTS = 512

Field = Union[ClosedForm, ScalarField]


class MonotonicityError(ValueError):
    """The distinguished derivative ``u_{x_n}`` is not positive somewhere."""


class VanishingGradientError(ValueError):
    """``|grad u|`` drops below the floor, so unit normals are undefined."""


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class EikonalSolution:
    """``|grad v|^2 = G(v)`` on ``grid``; ``G`` is a profile in one variable."""

    v: ClosedForm
    G: ClosedForm
    grid: Grid
    time_axis: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "v", as_expr(self.v))
        object.__setattr__(self, "G", as_expr(self.G))
        if self.grid.dims not in (2, 3):
            raise UnsupportedDimensionError("Eikonal solutions are handled for n = 2 or 3")
        if self.time_axis is None:
            object.__setattr__(self, "time_axis", self.grid.dims - 1)
        if not 0 <= self.time_axis < self.grid.dims:
            raise ValueError(f"time_axis {self.time_axis} out of range")

    def eikonal_residual(self) -> ResidualReport:
        p = Partials(self.v, self.grid)
        lhs = sum(g * g for g in p.gradient())
        rhs = evaluate_on(self.G(self.v), self.grid)
        return ResidualReport.of("eikonal", lhs - rhs, self.grid)


@dataclass(frozen=True)
class EulerField:
    """Components ``F_i`` indexed by the non-distinguished axes ``y_axes``."""

    F: tuple
    grid: Grid
    time_axis: int

    @property
    def y_axes(self) -> tuple[int, ...]:
        return tuple(a for a in range(self.grid.dims) if a != self.time_axis)

    @property
    def analytic(self) -> bool:
        return all(isinstance(c, ClosedForm) for c in self.F)

    def values(self) -> list[np.ndarray]:
        return [sample(c, self.grid) for c in self.F]


@dataclass(frozen=True)
class GeneralizedEqSpec:
    """Coefficients of ``a(u) Lap u + b(u)|grad u|^2 = f(u)`` and
    ``k(v) Lap v + l(v)|grad v|^2 = g(v)`` with link ``u = Phi(v)``.

    Every coefficient is a profile in one variable (axis 0).
    """

    a: ClosedForm
    b: ClosedForm
    f: ClosedForm
    k: ClosedForm
    l: ClosedForm
    g: ClosedForm
    Phi: ClosedForm

    def __post_init__(self):
        for name in ("a", "b", "f", "k", "l", "g", "Phi"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))

    def p(self) -> ClosedForm:
        a_phi, b_phi = self.a(self.Phi), self.b(self.Phi)
        d1, d2 = self.Phi.diff(0), self.Phi.diff(0).diff(0)
        return self.k * a_phi * d2 + self.k * b_phi * d1 * d1 - self.l * a_phi * d1

    def G(self) -> ClosedForm:
        return (self.k * self.f(self.Phi) - self.g * self.a(self.Phi) * self.Phi.diff(0)) / self.p()

    def div_ode(self, G: ClosedForm | None = None) -> ClosedForm:
        """Left minus right side of the divergence ODE for the link ``Phi``."""
        G = self.G() if G is None else G
        d1, d2 = self.Phi.diff(0), self.Phi.diff(0).diff(0)
        return (
            self.a(self.Phi) * d1 * G.diff(0)
            + 2.0 * (self.b(self.Phi) * d1 * d1 + self.a(self.Phi) * d2) * G
            - 2.0 * self.f(self.Phi)
        )


# -- ratio fields ---------------------------------------------------------------

def _require_monotone(dn: np.ndarray, grid: Grid, margin: float = MONOTONE_MARGIN):
    where = first_point(dn <= margin, grid)
    if where is not None:
        raise MonotonicityError(f"u_(x_n) <= {margin:g} at {where}")


def ratio_field(u: Field, grid: Grid | None = None, time_axis: int | None = None, accuracy: int = 2) -> EulerField:
    """``F_i = u_{x_i} / u_{x_n}`` after a sampled monotonicity check."""
    p = Partials(u, grid, accuracy)
    grid = p.grid
    tn = grid.dims - 1 if time_axis is None else time_axis
    _require_monotone(p(tn), grid)
    ys = [a for a in range(grid.dims) if a != tn]
    if p.analytic:
        F = tuple(u.diff(a) / u.diff(tn) for a in ys)
    else:
        F = tuple(ScalarField(grid, p(a) / p(tn)) for a in ys)
    return EulerField(F, grid, tn)


def eikonal_to_euler(sol: EikonalSolution, check_eikonal: bool = True, tol: float = ANALYTIC_TOL) -> EulerField:
    """The Euler field of an Eikonal solution."""
    if check_eikonal:
        rep = sol.eikonal_residual()
        if not rep.passed(tol):
            raise ValueError(f"|grad v|^2 - G(v) = {rep.linf:.3e} exceeds {tol:g}; not an Eikonal solution")
    return ratio_field(sol.v, sol.grid, sol.time_axis)


def euler_residual(F: EulerField, accuracy: int = 2) -> ResidualReport:
    """Per-component ``F_{i,x_n} + sum_j F_j F_{i,x_j}``, max over components."""
    grid, tn, ys = F.grid, F.time_axis, F.y_axes
    parts = []
    if F.analytic:
        for i, Fi in enumerate(F.F):
            r = Fi.diff(tn)
            for Fj, yj in zip(F.F, ys):
                r = r + Fj * Fi.diff(yj)
            parts.append(ResidualReport.of(f"momentum_{i + 1}", evaluate_on(r, grid), grid))
    else:
        vals = F.values()
        for i in range(len(vals)):
            p = Partials(ScalarField(grid, vals[i]), grid, accuracy)
            r = p(tn) + sum(vals[j] * p(yj) for j, yj in enumerate(ys))
            parts.append(ResidualReport.of(f"momentum_{i + 1}", r, grid))
    return ResidualReport.combine("euler", parts)


def divergence_y(F: EulerField, accuracy: int = 2) -> np.ndarray:
    if F.analytic:
        expr = sum((Fi.diff(a) for Fi, a in zip(F.F, F.y_axes)), as_expr(0.0))
        return evaluate_on(expr, F.grid)
    vals = F.values()
    return sum(Partials(ScalarField(F.grid, v), F.grid, accuracy)(a) for v, a in zip(vals, F.y_axes))


# -- inversion in two dimensions ------------------------------------------------

def reconstruct_eikonal_2d(F: EulerField, a: ClosedForm | None = None) -> ScalarField:
    """Invert the ratio map for ``n = 2``.

    ``v(y, x_n) = a(y) + int_{x_n0}^{x_n} (F^2 + 1)^{-1/2} dx_n`` with
    composite Simpson along each ``x_n`` line from the lower edge of the
    grid.  ``a`` (a profile in one variable) gives the values on that base
    line.  When omitted, the base-line values are integrated from
    ``v_y = F v_{x_n}`` so that the result is an Eikonal solution whenever
    ``F`` solves Burgers.
    """
    grid = F.grid
    if grid.dims != 2 or len(F.F) != 1:
        raise UnsupportedDimensionError(
            "inversion is only available for n = 2; for n >= 3 further assumptions are needed"
        )
    tn = F.time_axis
    ya = 1 - tn
    f = np.moveaxis(F.values()[0], (ya, tn), (0, 1))
    w = 1.0 / np.sqrt(f * f + 1.0)
    ys, xs = grid.axis(ya), grid.axis(tn)
    along = cumulative_simpson(w, x=xs, axis=1, initial=0.0)
    if a is None:
        base = cumulative_simpson(f[:, 0] * w[:, 0], x=ys, initial=0.0)
    else:
        base = np.broadcast_to(np.asarray(as_expr(a).evaluate({0: ys}), dtype=float), ys.shape)
    v = base[:, None] + along
    return ScalarField(grid, np.moveaxis(v, (0, 1), (ya, tn)))


def unit_gradient_residual(v: ScalarField, accuracy: int = 4) -> ResidualReport:
    """``|grad v|^2 - 1`` by finite differences."""
    p = Partials(v, accuracy=accuracy)
    return ResidualReport.of("eikonal_unit", sum(g * g for g in p.gradient()) - 1.0, v.grid)


# -- curvature and the divergence equivalence -------------------------------------

def _gradient_norm(p: Partials) -> np.ndarray:
    norm = np.sqrt(sum(g * g for g in p.gradient()))
    where = first_point(norm < GRADIENT_FLOOR, p.grid)
    if where is not None:
        raise VanishingGradientError(f"|grad u| < {GRADIENT_FLOOR:g} at {where}")
    return norm


def mean_curvature(u: Field, grid: Grid | None = None, accuracy: int = 2) -> ScalarField:
    """``div(grad u / |grad u|)`` pointwise."""
    p = Partials(u, grid, accuracy)
    grid = p.grid
    _gradient_norm(p)
    if p.analytic:
        dims = range(grid.dims)
        norm = sqrt(sum((u.diff(a) * u.diff(a) for a in dims), as_expr(0.0)))
        expr = sum(((u.diff(a) / norm).diff(a) for a in dims), as_expr(0.0))
        return ScalarField(grid, evaluate_on(expr, grid))
    norm = _gradient_norm(p)
    out = sum(
        Partials(ScalarField(grid, p(a) / norm), grid, accuracy)(a) for a in range(grid.dims)
    )
    return ScalarField(grid, out)


@dataclass(frozen=True)
class EquivalenceReport:
    divergence: ResidualReport
    curvature: ResidualReport
    consistent: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "divergence": self.divergence.to_dict(),
            "curvature": self.curvature.to_dict(),
            "consistent": self.consistent,
            "tol": self.tol,
        }


def divergence_equivalence_check(
    u: Field, grid: Grid | None = None, time_axis: int | None = None, tol: float = ANALYTIC_TOL
) -> EquivalenceReport:
    """``div_y F`` and the mean curvature vanish together or not at all."""
    F = ratio_field(u, grid, time_axis)
    div = ResidualReport.of("div_y_F", divergence_y(F), F.grid)
    curv = ResidualReport.of("mean_curvature", mean_curvature(u, F.grid).values, F.grid)
    return EquivalenceReport(div, curv, div.passed(tol) == curv.passed(tol), tol)


# -- the generalised pipeline ---------------------------------------------------

@dataclass(frozen=True)
class Theorem1Result:
    G: ClosedForm
    eikonal: ResidualReport
    euler: ResidualReport
    div_ode: ResidualReport
    div_y: ResidualReport
    u_equation: ResidualReport
    v_equation: ResidualReport
    t_range: tuple[float, float]

    def reports(self) -> list[ResidualReport]:
        return [self.eikonal, self.euler, self.div_ode, self.div_y, self.u_equation, self.v_equation]


def _profile_values(e: ClosedForm, ts: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(e.evaluate({0: ts}), dtype=float), ts.shape)


def theorem1_pipeline(
    spec: GeneralizedEqSpec, v: ClosedForm, grid: Grid, time_axis: int | None = None
) -> Theorem1Result:
    """Run the generalised Eikonal-to-Euler argument for a concrete ``v``.

    Raises ``ValueError`` when ``p``, ``a(Phi)`` or ``Phi'`` vanishes on the
    sampled range of ``v``.
    """
    v = as_expr(v)
    tn = grid.dims - 1 if time_axis is None else time_axis
    vals = evaluate_on(v, grid)
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-14:
        hi = lo + 1e-6
    ts = np.linspace(lo, hi, ODE_POINTS)
    probe = np.union1d(ts, vals.ravel())
    for name, e in (("p", spec.p()), ("a(Phi)", spec.a(spec.Phi)), ("Phi'", spec.Phi.diff(0))):
        bad = np.abs(_profile_values(e, probe)) < 1e-12
        if bad.any():
            raise ValueError(f"{name} vanishes at t = {probe[int(np.argmax(bad))]:.6g} on the range of v")

    G = spec.G()
    pv = Partials(v, grid)
    grad2 = sum(g * g for g in pv.gradient())
    eik = ResidualReport.of("eikonal", grad2 - evaluate_on(G(v), grid), grid)

    u = spec.Phi(v)
    F = ratio_field(u, grid, tn)
    euler = euler_residual(F)
    div_y = ResidualReport.of("div_y_F", divergence_y(F), grid)
    ode = ResidualReport.of("div_ode", _profile_values(spec.div_ode(G), ts), grid_h=(hi - lo) / (ODE_POINTS - 1))

    pu = Partials(u, grid)
    gu2 = sum(g * g for g in pu.gradient())
    res_u = (
        evaluate_on(spec.a(u), grid) * pu.laplacian() + evaluate_on(spec.b(u), grid) * gu2 - evaluate_on(spec.f(u), grid)
    )
    res_v = (
        evaluate_on(spec.k(v), grid) * pv.laplacian() + evaluate_on(spec.l(v), grid) * grad2 - evaluate_on(spec.g(v), grid)
    )
    return Theorem1Result(
        G,
        eik,
        euler,
        ode,
        div_y,
        ResidualReport.of("u_equation", res_u, grid),
        ResidualReport.of("v_equation", res_v, grid),
        (lo, hi),
    )

