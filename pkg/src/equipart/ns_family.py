"""Navier-Stokes solutions with linearly dependent components.

Every family here has the shape ``u_i = d_i (g(sigma, t) - A(t)) + e_i`` and
``p = a(t) (d . x) + b(t)``, where ``sigma`` is linear in space.  The profile
``g`` is either a closed form satisfying its reduced 1D (or 2D) equation,
or the heat-kernel evolution of initial data ``H`` computed by Gauss-Hermite
quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.special import roots_hermite

from .euler_family import time_function
from .fields import (
    TIME_AXIS,
    ClosedForm,
    Grid,
    ResidualReport,
    ScalarField,
    VectorField,
    affine,
    antiderivative,
    as_expr,
    coords,
    evaluate_on,
    fornberg_weights,
    from_json,
    to_json,
)
from .flows import FlowSolution, analytic_residual, divergence_report

KERNEL_FLAG = "1/sqrt(4*pi*mu_tilde*t)"
GH_START, GH_CAP = 64, 1024
GH_TOL = 1e-10
PREFLIGHT_TOL = 1e-10


class Family(str, Enum):
    NS2D = "NS2D"
    NS3D = "NS3D"
    NS3D_IVP = "NS3D_IVP"


class QuadratureError(RuntimeError):
    pass


class PreflightError(ValueError):
    """The supplied profile does not solve its reduced equation."""


# -- heat kernel -----------------------------------------------------------------

@dataclass(frozen=True)
class HeatSolution:
    values: np.ndarray
    nodes: int
    change: float


@dataclass(frozen=True)
class _Rule:
    x: np.ndarray
    w: np.ndarray


_RULES: dict[int, _Rule] = {}


def _rule(n: int) -> _Rule:
    if n not in _RULES:
        x, w = roots_hermite(n)
        _RULES[n] = _Rule(x, w / math.sqrt(math.pi))
    return _RULES[n]


def _convolve(H: ClosedForm, s: np.ndarray, spread: float, n: int) -> np.ndarray:
    r = _rule(n)
    pts = s[..., None] + spread * r.x
    vals = np.broadcast_to(np.asarray(H.evaluate({0: pts}), dtype=float), pts.shape)
    return vals @ r.w


def heat_solve_1d(H: ClosedForm, mu_tilde: float, t: float, s, nodes: int | None = None,
                  tol: float = GH_TOL) -> HeatSolution:
    """``g(s, t) = (4 pi mu t)^{-1/2} int exp(-(s - w)^2 / (4 mu t)) H(w) dw``.

    With ``w = s + 2 sqrt(mu t) x`` this is a Gauss-Hermite sum.  The node
    count doubles from 64 until the sup change drops below ``tol`` (cap 1024),
    unless ``nodes`` fixes it.
    """
    if t <= 0:
        raise ValueError("heat evolution needs t > 0")
    if mu_tilde <= 0:
        raise ValueError("diffusivity must be positive")
    H = as_expr(H)
    s = np.asarray(s, dtype=float)
    spread = 2.0 * math.sqrt(mu_tilde * t)
    if nodes is not None:
        return HeatSolution(_convolve(H, s, spread, nodes), nodes, float("nan"))
    n = GH_START
    prev = _convolve(H, s, spread, n)
    while n < GH_CAP:
        n *= 2
        cur = _convolve(H, s, spread, n)
        change = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        if change < tol:
            return HeatSolution(cur, n, change)
        prev = cur
    raise QuadratureError(f"Gauss-Hermite sum did not settle below {tol:g} with {GH_CAP} nodes (last change {change:.3e})")


def heat_derivatives(H: ClosedForm, mu_tilde: float, t: float, s, nodes: int) -> tuple[np.ndarray, ...]:
    """``g, g_s, g_ss`` by convolving ``H, H', H''`` with a fixed rule."""
    H = as_expr(H)
    spread = 2.0 * math.sqrt(mu_tilde * t)
    s = np.asarray(s, dtype=float)
    return tuple(_convolve(e, s, spread, nodes) for e in (H, H.diff(0), H.diff(0).diff(0)))


# -- specs ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NSFamilySpec:
    """Parameters of one family.  ``g`` is a closed form in ``s`` (axis 0),
    ``eta`` (axis 1, 3D only) and ``t`` (axis 3); ``H`` is initial data."""

    family: Family
    mu: float
    c1: float = 0.0
    c2: float = 0.0
    ct1: float = 0.0
    ct2: float = 0.0
    g: ClosedForm | None = None
    H: ClosedForm | None = None
    a: ClosedForm = field(default_factory=lambda: as_expr(0.0))
    b: ClosedForm = field(default_factory=lambda: as_expr(0.0))

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("mu", "c1", "c2", "ct1", "ct2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("g", "H"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, as_expr(v))
        object.__setattr__(self, "a", time_function(self.a))
        object.__setattr__(self, "b", time_function(self.b))

    @property
    def mu_tilde(self) -> float:
        """Diffusivity of the reduced equation."""
        c1, c2 = self.c1, self.c2
        if self.family is Family.NS2D:
            return self.mu * (c1 * c1 + 1.0)
        return self.mu * (4 * c1 * c1 * c2 * c2 + c1 * c1 + c2 * c2)

    def violations(self) -> list[str]:
        out = []
        if not self.mu > 0:
            out.append("mu > 0")
        if self.family is not Family.NS2D and self.c1 * self.c2 == 0:
            out.append("c1*c2 != 0")
        if self.family is Family.NS3D_IVP and abs(self.ct1 * self.c2 + self.c1 * self.ct2) > 1e-12:
            out.append("ct1*c2 + c1*ct2 = 0")
        if self.g is None and self.H is None:
            out.append("profile g or initial data H supplied")
        return out

    def check(self):
        bad = self.violations()
        if bad:
            raise ValueError("constraint violated: " + ", ".join(bad))

    def to_json(self) -> dict:
        d = {"family": self.family.value, "mu": self.mu, "c1": self.c1, "c2": self.c2, "ct1": self.ct1, "ct2": self.ct2,
             "a": to_json(self.a), "b": to_json(self.b)}
        if self.g is not None:
            d["g"] = to_json(self.g)
        if self.H is not None:
            d["H"] = to_json(self.H)
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "NSFamilySpec":
        kw = {}
        for key, v in d.items():
            if key in ("mu", "c1", "c2", "ct1", "ct2"):
                kw[key] = v
            elif key in ("g", "H", "a", "b"):
                kw[key] = from_json(v)
            elif key != "family":
                raise ValueError(f"unknown field {key!r} in Navier-Stokes spec")
        return cls(Family(d["family"]), **kw)


def _structure(spec: NSFamilySpec):
    """Direction ``d``, offset ``e`` and phase coefficients of ``sigma``."""
    c1, c2 = spec.c1, spec.c2
    if spec.family is Family.NS2D:
        return (c1, 1.0), (c2, 0.0), (1.0, -c1)
    if spec.family is Family.NS3D_IVP:
        return (1.0, c1, c2), (0.0, spec.ct1, spec.ct2), (2 * c1 * c2, -c2, -c1)
    return (1.0, c1, c2), (0.0, spec.ct1, spec.ct2), (1.0, -1.0 / (2 * c1), -1.0 / (2 * c2))


def _assemble(spec: NSFamilySpec, g_field: ClosedForm) -> FlowSolution:
    d, e, _ = _structure(spec)
    A = antiderivative(spec.a, TIME_AXIS)
    u1 = g_field - A
    xs = coords()[: len(d)]
    p = spec.a * sum((di * xi for di, xi in zip(d, xs)), as_expr(0.0)) + spec.b
    return FlowSolution(tuple(di * u1 + ei for di, ei in zip(d, e)), p, spec.mu, spec.family.value)


# -- closed-form profiles --------------------------------------------------------------

def ns2d_profile_residual(spec: NSFamilySpec) -> ClosedForm:
    """``g_t + c2 g_s - mu (c1^2 + 1) g_ss`` for ``g(s, t)``."""
    g = spec.g
    return g.diff(TIME_AXIS) + spec.c2 * g.diff(0) - spec.mu_tilde * g.diff(0).diff(0)


def ns3d_profile_residual(spec: NSFamilySpec) -> ClosedForm:
    """The reduced equation for ``g(s, eta, t)`` including the mixed term.

    ``mu (c1^2 - c2^2) / (2 c1^2 c2^2) g_{s eta}`` is part of the Laplacian
    under the change of variables and vanishes when ``c1^2 = c2^2``.
    """
    g, c1, c2, d1, d2, mu = spec.g, spec.c1, spec.c2, spec.ct1, spec.ct2, spec.mu
    q = 1.0 / (4 * c1 * c1) + 1.0 / (4 * c2 * c2)
    gs, ge = g.diff(0), g.diff(1)
    return (
        g.diff(TIME_AXIS)
        - (d1 / (2 * c1) + d2 / (2 * c2)) * gs
        + (d1 / (2 * c1) - d2 / (2 * c2)) * ge
        - mu * q * (gs.diff(0) + ge.diff(1))
        - mu * gs.diff(0)
        - mu * (c1 * c1 - c2 * c2) / (2 * c1 * c1 * c2 * c2) * gs.diff(1)
    )


def _phase_exprs(spec: NSFamilySpec):
    c1, c2 = spec.c1, spec.c2
    if spec.family is Family.NS3D:
        s = affine([1.0, -1.0 / (2 * c1), -1.0 / (2 * c2)])
        eta = affine([0.0, 1.0 / (2 * c1), -1.0 / (2 * c2)])
        return {0: s, 1: eta}
    _, _, sig = _structure(spec)
    return {0: affine(list(sig))}


@dataclass(frozen=True)
class NSResult:
    u: VectorField
    p: ScalarField
    preflight: ResidualReport | None
    residual: ResidualReport
    divergence: ResidualReport
    flow: FlowSolution | None = None
    flags: Mapping[str, object] = field(default_factory=dict)

    def reports(self) -> list[ResidualReport]:
        out = [self.residual, self.divergence]
        return ([self.preflight] if self.preflight is not None else []) + out


def _preflight(spec: NSFamilySpec, grid: Grid, t: float, tol: float) -> ResidualReport:
    res = ns2d_profile_residual(spec) if spec.family is Family.NS2D else ns3d_profile_residual(spec)
    sampled = evaluate_on(res.substitute(_phase_exprs(spec)), grid, t)
    rep = ResidualReport.of("profile_equation", sampled, grid)
    if not rep.passed(tol):
        raise PreflightError(f"g misses its reduced equation by {rep.linf:.3e} (tolerance {tol:g})")
    return rep


def _generate_closed(spec: NSFamilySpec, grid: Grid, t: float, tol: float) -> NSResult:
    pre = _preflight(spec, grid, t, tol)
    flow = _assemble(spec, spec.g.substitute(_phase_exprs(spec)))
    u, p = flow.sample(grid, t)
    res = analytic_residual(flow, grid, t, name="navier_stokes")
    return NSResult(u, p, pre, res, divergence_report(flow, grid, t), flow)


# -- quadrature profiles ------------------------------------------------------------------

def _heat_sampler(spec: NSFamilySpec, grid: Grid, shift: float):
    """``g(sigma, t)`` on the grid: the heat evolution of ``H``, advected by ``shift * t``."""
    _, _, sig = _structure(spec)
    sigma = sum(c * m for c, m in zip(sig, grid.mesh))
    mu_t = spec.mu_tilde
    return sigma, (lambda t, n=None: heat_solve_1d(spec.H, mu_t, t, sigma - shift * t, nodes=n))


def _quadrature_result(spec: NSFamilySpec, grid: Grid, t: float, shift: float) -> NSResult:
    d, e, _ = _structure(spec)
    _, sampler = _heat_sampler(spec, grid, shift)
    base = sampler(t)
    n = base.nodes
    a_t = lambda s: float(spec.a.evaluate({TIME_AXIS: s}))
    b_t = lambda s: float(spec.b.evaluate({TIME_AXIS: s}))
    A_expr = antiderivative(spec.a, TIME_AXIS)

    def u_at(s):
        gv = sampler(s, n).values
        As = float(A_expr.evaluate({TIME_AXIS: s}))
        return [di * (gv - As) + ei for di, ei in zip(d, e)]

    def p_at(s):
        return a_t(s) * sum(di * m for di, m in zip(d, grid.mesh)) + b_t(s)

    u_now = u_at(t)
    u = VectorField(grid, np.stack([np.broadcast_to(c, grid.shape) for c in u_now]))
    p = ScalarField(grid, p_at(t))
    res, div = quadrature_residual(spec, grid, t, shift, n)
    flags = {"kernel_normalization": KERNEL_FLAG, "nodes": n, "mu_tilde": spec.mu_tilde}
    return NSResult(u, p, None, res, div, None, flags)


def quadrature_residual(spec: NSFamilySpec, grid: Grid, t: float, shift: float, nodes: int):
    """Navier-Stokes residual of a heat-kernel profile.

    Space derivatives come from convolving ``H'`` and ``H''``; ``g_t`` from a
    sixth-order centred difference with ``delta = max(1e-5, t/100)`` and the
    node count held fixed across the stencil.
    """
    d, e, sig = _structure(spec)
    sigma = sum(c * m for c, m in zip(sig, grid.mesh))
    mu_t = spec.mu_tilde
    delta = max(1e-5, t / 100.0)
    g, gs, gss = heat_derivatives(spec.H, mu_t, t, sigma - shift * t, nodes)
    offs = (-3, -2, -1, 1, 2, 3)
    wts = fornberg_weights(1, tuple(float(k) for k in offs))
    gt = sum(w * heat_solve_1d(spec.H, mu_t, t + k * delta, sigma - shift * (t + k * delta), nodes=nodes).values
             for k, w in zip(offs, wts)) / delta
    A = float(antiderivative(spec.a, TIME_AXIS).evaluate({TIME_AXIS: t}))
    a = float(spec.a.evaluate({TIME_AXIS: t}))
    u1 = g - A
    u = [di * u1 + ei for di, ei in zip(d, e)]
    adv = sum(uj * sj for uj, sj in zip(u, sig)) * gs
    lap = sum(sj * sj for sj in sig) * gss
    parts = []
    for i, di in enumerate(d):
        r = di * (gt - a) + di * adv + a * di - spec.mu * di * lap
        parts.append(ResidualReport.of(f"momentum_{'xyz'[i]}", r, grid))
    div = sum(di * sj for di, sj in zip(d, sig)) * gs
    div_rep = ResidualReport.of("divergence", div, grid)
    parts.append(div_rep)
    note = f"Gauss-Hermite {nodes} nodes, 6th-order time difference dt {delta:g}"
    return ResidualReport.combine("navier_stokes", parts, note=note), div_rep


# -- public generators ------------------------------------------------------------------

def generate_ns2d(spec: NSFamilySpec, grid: Grid, t: float, tol: float = PREFLIGHT_TOL) -> NSResult:
    """The 2D family ``u = (c1, 1)(g(x - c1 y, t) - A) + (c2, 0)``, ``p = a(c1 x + y) + b``.

    With ``H`` instead of ``g`` the profile is the heat evolution of ``H`` at
    diffusivity ``mu (c1^2 + 1)`` shifted to ``s - c2 t``.
    """
    if spec.family is not Family.NS2D:
        raise ValueError("expected an NS2D spec")
    spec.check()
    if grid.dims != 2:
        raise ValueError("NS2D needs a 2D grid")
    if spec.g is not None:
        return _generate_closed(spec, grid, t, tol)
    return _quadrature_result(spec, grid, t, shift=spec.c2)


def generate_ns3d(spec: NSFamilySpec, grid: Grid, t: float, tol: float = PREFLIGHT_TOL) -> NSResult:
    """The 3D family with ``g(s, eta, t)``, ``s = x - (c2 y + c1 z)/(2 c1 c2)``,
    ``eta = (c2 y - c1 z)/(2 c1 c2)``; ``g`` is checked against its reduced
    equation before assembly."""
    if spec.family is not Family.NS3D:
        raise ValueError("expected an NS3D spec")
    spec.check()
    if spec.g is None:
        raise ValueError("NS3D needs a closed-form g(s, eta, t)")
    if grid.dims != 3:
        raise ValueError("NS3D needs a 3D grid")
    return _generate_closed(spec, grid, t, tol)


def generate_ivp(spec: NSFamilySpec, grid: Grid, t: float) -> NSResult:
    if spec.family is not Family.NS3D_IVP:
        raise ValueError("expected an NS3D_IVP spec")
    spec.check()
    if spec.H is None:
        raise ValueError("NS3D_IVP needs initial data H")
    return _quadrature_result(spec, grid, t, shift=0.0)


@dataclass(frozen=True)
class LimitReport:
    times: tuple[float, ...]
    errors: tuple[float, ...]
    monotone: bool
    residuals: tuple[ResidualReport, ...]
    mu_tilde: float
    nodes: tuple[int, ...]
    kernel_normalization: str = KERNEL_FLAG

    def to_dict(self) -> dict:
        return {
            "times": list(self.times),
            "errors": list(self.errors),
            "monotone": self.monotone,
            "residuals": [r.to_dict() for r in self.residuals],
            "mu_tilde": self.mu_tilde,
            "nodes": list(self.nodes),
            "kernel_normalization": self.kernel_normalization,
        }


def initial_field(spec: NSFamilySpec, grid: Grid) -> list[np.ndarray]:
    """``h = (h1, c1 h1 + ct1, c2 h1 + ct2)`` with ``h1 = H(2 c1 c2 x - c2 y - c1 z)``."""
    d, e, sig = _structure(spec)
    sigma = sum(c * m for c, m in zip(sig, grid.mesh))
    h1 = np.broadcast_to(np.asarray(spec.H.evaluate({0: sigma}), dtype=float), grid.shape)
    return [di * h1 + ei for di, ei in zip(d, e)]


def ivp_limit_check(spec: NSFamilySpec, grid: Grid, t_sequence: Sequence[float]) -> LimitReport:
    """``sup |u(., t) - h|`` along ``t_sequence`` plus the residual at each time.

    ``monotone`` holds when the errors do not increase as ``t`` decreases.
    """
    if spec.family is not Family.NS3D_IVP:
        raise ValueError("expected an NS3D_IVP spec")
    spec.check()
    h = initial_field(spec, grid)
    ts = tuple(float(t) for t in t_sequence)
    errs, reps, nodes = [], [], []
    for t in ts:
        r = generate_ivp(spec, grid, t)
        errs.append(float(max(np.max(np.abs(r.u.values[i] - h[i])) for i in range(3))))
        reps.append(r.residual)
        nodes.append(int(r.flags["nodes"]))
    order = np.argsort(ts)
    sorted_errs = [errs[i] for i in order]
    monotone = all(a <= b + 1e-15 for a, b in zip(sorted_errs, sorted_errs[1:]))
    return LimitReport(ts, tuple(errs), monotone, tuple(reps), spec.mu_tilde, tuple(nodes))


def ns2d_flow(g: ClosedForm, c1: float, c2: float, a=0.0, b=0.0, mu: float = 0.0) -> FlowSolution:
    """The 2D family as a closed-form flow for any viscosity, including 0."""
    spec = NSFamilySpec(Family.NS2D, mu=max(mu, 1.0), c1=c1, c2=c2, g=g, a=a, b=b)
    flow = _assemble(spec, spec.g.substitute(_phase_exprs(spec)))
    return FlowSolution(flow.u, flow.p, mu, flow.name)
