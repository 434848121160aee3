"""Registry of verification targets: every solution family and example the
library constructs, with its checks and default domains."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import ac_system as acs
from . import allen_cahn as ac
from . import eikonal_euler as ee
from . import euler_family as ef
from . import leray
from . import ns_family as nsf
from .fields import (
    ANALYTIC_TOL,
    TIME_AXIS,
    Grid,
    ResidualReport,
    VectorField,
    as_expr,
    coords,
    cos,
    evaluate_on,
    exp,
    from_json,
    sin,
    sqrt,
    tanh,
    var,
)
from .flows import flow_residual

NS_TOL = 1e-8


class ParameterError(ValueError):
    """Parameters violate a stated constraint of the target."""

    def __init__(self, violations: Sequence[Mapping]):
        self.violations = list(violations)
        super().__init__("; ".join(v["constraint"] for v in self.violations))


@dataclass
class Context:
    """What a check needs: the built object, a grid, times and the path."""

    obj: object
    grid: Grid
    times: tuple[float, ...]
    path: str = "analytic"
    flags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Outcome:
    reports: tuple[ResidualReport, ...]
    passed: bool | None = None  # overrides the tolerance test when set
    detail: Mapping = field(default_factory=dict)


CheckFn = Callable[[Context], "Outcome | ResidualReport | Sequence[ResidualReport]"]


@dataclass(frozen=True)
class Check:
    run: CheckFn
    tol: float = ANALYTIC_TOL
    fd_order: int | None = None


@dataclass(frozen=True)
class Target:
    id: str
    citation: str
    kind: str
    params: tuple[str, ...]
    build: Callable[[Mapping, np.random.Generator], object]
    checks: Mapping[str, Check]
    grid: Callable[[int | None], Grid]
    default_n: int
    times: tuple[float, ...] = (0.5,)
    flags: Mapping[str, object] = field(default_factory=dict)

    def default_checks(self) -> tuple[str, ...]:
        return tuple(self.checks)


def as_outcome(r) -> Outcome:
    if isinstance(r, Outcome):
        return r
    if isinstance(r, ResidualReport):
        return Outcome((r,))
    return Outcome(tuple(r))


def _box(lo, hi, dims):
    def make(n):
        return Grid((lo,) * dims if np.isscalar(lo) else tuple(lo), (hi,) * dims if np.isscalar(hi) else tuple(hi),
                    (n,) * dims)
    return make


# -- Euler families -------------------------------------------------------------

def _euler_build(family):
    def build(params, rng):
        params = dict(params)
        if not params or params.pop("random", False):
            return ef.random_spec(family, rng)
        spec = ef.EulerFamilySpec.from_json({"family": family.value, **params})
        bad = ef.validate_params(spec)
        if bad:
            raise ParameterError([v.to_dict() for v in bad])
        return spec
    return build


def _euler_momentum(ctx: Context):
    flow = ef.build(ctx.obj)
    return [flow_residual(flow, ctx.grid, t, ctx.path) for t in ctx.times]


def _euler_initial(ctx: Context):
    r = ef.theorem2_ic_check(ctx.obj, ctx.grid)
    return Outcome(r.reports, r.ok)


def _euler_target(family, citation):
    dims = family.dims
    checks = {"momentum": Check(_euler_momentum, fd_order=2)}
    if family in (ef.Family.E3D_SOL1, ef.Family.E3D_SOL4, ef.Family.E3D_SOL5):
        checks["initial"] = Check(_euler_initial, tol=1e-12)
    return Target(family.value, citation, "euler", ef.PARAM_NAMES + ("profiles", "a", "b", "random"),
                  _euler_build(family), checks, _box(-1.0, 1.0, dims), 21 if dims == 2 else 9)


# -- Navier-Stokes families ----------------------------------------------------------

_NS_DEFAULTS = {
    nsf.Family.NS2D: lambda: nsf.NSFamilySpec(nsf.Family.NS2D, mu=0.1, c1=0.5, c2=0.3, H=sin(var(0)), a=0.2),
    nsf.Family.NS3D: lambda: nsf.NSFamilySpec(
        nsf.Family.NS3D, mu=0.1, c1=1.0, c2=1.0,
        g=exp(-0.2 * var(TIME_AXIS)) * sin(var(0)) * cos(var(1)),
    ),
    nsf.Family.NS3D_IVP: lambda: nsf.NSFamilySpec(nsf.Family.NS3D_IVP, mu=0.1, c1=1.0, c2=1.0, ct1=1.0, ct2=-1.0,
                                                  H=sin(var(0))),
}


def _ns_build(family):
    def build(params, rng):
        if not params:
            return _NS_DEFAULTS[family]()
        spec = nsf.NSFamilySpec.from_json({"family": family.value, **params})
        bad = spec.violations()
        if bad:
            raise ParameterError([{"constraint": c, "source": family.value, "value": None} for c in bad])
        return spec
    return build


_NS_GENERATORS = {
    nsf.Family.NS2D: nsf.generate_ns2d,
    nsf.Family.NS3D: nsf.generate_ns3d,
    nsf.Family.NS3D_IVP: nsf.generate_ivp,
}


def _ns_results(ctx: Context):
    key = ("ns", ctx.grid, ctx.times)
    if key not in ctx.flags:
        gen = _NS_GENERATORS[ctx.obj.family]
        ctx.flags[key] = [gen(ctx.obj, ctx.grid, t) for t in ctx.times]
    return ctx.flags[key]


def _ns_residual(ctx: Context):
    out = []
    for r in _ns_results(ctx):
        out.append(r.residual)
        if r.preflight is not None:
            out.append(r.preflight)
    return out


def _ns_divergence(ctx: Context):
    return [r.divergence for r in _ns_results(ctx)]


def _ns_limit(ctx: Context):
    rep = nsf.ivp_limit_check(ctx.obj, ctx.grid, (0.1, 0.01, 0.001))
    ts = np.array(rep.times)
    expected = 1.0 - np.exp(-ctx.obj.mu_tilde * ts)
    err = ResidualReport.of("limit_vs_1-exp(-mu_tilde t)", np.array(rep.errors) - expected, ctx.grid,
                            note="sin initial data")
    return Outcome((err,) + rep.residuals, None, {"monotone": rep.monotone, "errors": list(rep.errors)})


def _ns_target(family, citation):
    checks = {"residual": Check(_ns_residual, tol=NS_TOL), "divergence": Check(_ns_divergence)}
    if family is nsf.Family.NS3D_IVP:
        checks["limit"] = Check(_ns_limit, tol=1e-8)
    dims = 2 if family is nsf.Family.NS2D else 3
    half = math.pi / 2
    return Target(family.value, citation, "navier-stokes", ("mu", "c1", "c2", "ct1", "ct2", "g", "H", "a", "b"),
                  _ns_build(family), checks, _box(-half, half, dims), 17 if dims == 2 else 9, (0.1,),
                  {"kernel_normalization": nsf.KERNEL_FLAG})


# -- vector Allen-Cahn examples ---------------------------------------------------------

def _ac_build(id):
    def build(params, rng):
        try:
            return acs.catalog_example(id, params, check=False)
        except acs.ConstraintError as e:
            raise ParameterError([{"constraint": str(e), "source": id, "value": None}]) from None
    return build


def _ac_field(ctx: Context):
    sol = ctx.obj
    if ctx.path == "fd":
        return VectorField(ctx.grid, np.stack([evaluate_on(c, ctx.grid) for c in sol.u]))
    return sol


def _ac_system(ctx):
    return acs.system_residual(_ac_field(ctx), ctx.obj.potential, ctx.grid)


def _ac_equipartition(ctx):
    return acs.equipartition_residual_vec(_ac_field(ctx), ctx.obj.potential, ctx.grid)


def _rank_grid(ctx):
    if ctx.obj.subdomain is None:
        raise ValueError(f"{ctx.obj.tag} declares no subdomain with u_iy > 0")
    return ctx.obj.subdomain


def _ac_detgrad(ctx):
    g = _rank_grid(ctx)
    return Outcome((acs.ratio_and_detgrad(ctx.obj, g).det_report,), None, {"subdomain": g.to_dict()})


def _ac_chain(ctx):
    g = _rank_grid(ctx)
    return Outcome(tuple(acs.proof_chain_reports(ctx.obj, g)), None, {"subdomain": g.to_dict()})


def _ac_dependence(ctx):
    sol = ctx.obj
    g = sol.subdomain or sol.domain
    r1, r2 = acs.dependence_check(sol, sol.witness, g)
    return Outcome((r1, r2), None, {"witness": str(sol.witness), "grid": g.to_dict()})


def _ac_cross(ctx):
    return leray.cross_identity_residual(_ac_field(ctx) if ctx.path == "fd" else ctx.obj.u, ctx.grid)


def _ac_four_phase(ctx):
    lims = acs.four_phase_limits(ctx.obj)
    reps = tuple(ResidualReport.of(f"limit {r.direction}", r.limit - r.expected, grid_h=0.0) for r in lims)
    return Outcome(reps, all(r.error <= 1e-6 for r in lims))


def _ac_heteroclinic(ctx):
    lims = acs.heteroclinic_limits(printed=ctx.obj.tag.endswith("printed"))
    reps = tuple(ResidualReport.of(f"profile {r.direction}", r.limit - r.expected, grid_h=0.0) for r in lims)
    return Outcome(reps, all(r.error <= 1e-6 for r in lims))


def _ac_target(entry: acs.CatalogEntry):
    sol = acs.catalog_example(entry.id, check=False)
    checks = {
        "system": Check(_ac_system, fd_order=2),
        "equipartition": Check(_ac_equipartition, fd_order=2),
        "cross_identity": Check(_ac_cross, fd_order=4),
    }
    if sol.subdomain is not None:
        checks["detgrad"] = Check(_ac_detgrad)
        checks["chain"] = Check(_ac_chain)
    if sol.witness is not None:
        checks["dependence"] = Check(_ac_dependence)
    if entry.id == "fourwell-a9":
        checks["limits"] = Check(_ac_four_phase, tol=1e-6)
    if entry.id.startswith("fourwell-a10"):
        checks["limits"] = Check(_ac_heteroclinic, tol=1e-6)
    d = sol.domain
    flags = {"fourwell_normalization": "1/128"} if entry.id.startswith("fourwell") else {}

    def grid(n, d=d):
        return d if n is None else Grid(d.lo, d.hi, (n, n))
    return Target(entry.id, entry.citation, "ac-system", entry.params, _ac_build(entry.id), checks, grid,
                  d.n[0], (0.0,), flags)


# -- scalar Allen-Cahn and Eikonal ----------------------------------------------------------

SQRT2 = math.sqrt(2.0)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _planar_build(params, rng):
    d = _unit(params.get("direction", (0.6, 0.0, 0.8)))
    if d[-1] <= 0:
        raise ParameterError([{"constraint": "direction has a positive last component (u_z > 0)",
                               "source": "ac-tanh-planar", "value": float(d[-1])}])
    c = float(params.get("offset", 0.0))
    return ac.planar_field(tanh(var(0) / SQRT2), d, c)


def _planar_ac(ctx):
    return ac.ac_residual(ctx.obj, ac.double_well(), ctx.grid)


def _planar_equipartition(ctx):
    return ac.equipartition_residual(ctx.obj, ac.double_well(), ctx.grid)


def _planar_curvature(ctx):
    return ResidualReport.of("mean_curvature", ee.mean_curvature(ctx.obj, ctx.grid).values, ctx.grid)


def _planar_div(ctx):
    F = ee.ratio_field(ctx.obj, ctx.grid)
    return ResidualReport.of("div_y_F", ee.divergence_y(F), ctx.grid)


def _planar_profile(ctx):
    prof = ac.solve_profile(ac.double_well(), u0=0.0, du0=1.0 / SQRT2, t_range=(-5.0, 5.0))
    err = ResidualReport.of("profile_vs_tanh", prof.h - np.tanh(prof.t / SQRT2), grid_h=float(prof.t[1] - prof.t[0]))
    drift = ResidualReport(name="first_integral_drift", linf=prof.energy_drift, l2=prof.energy_drift,
                           grid_h=err.grid_h)
    return Outcome((err, drift), err.linf <= 1e-8 and drift.linf <= 1e-8)


def _radial_build(params, rng):
    center = params.get("center", (0.0, 0.0, -3.0))
    return ac.radial_candidate(center, float(params.get("c", 0.0)))


def _radial_joint(ctx):
    W = ac.double_well()
    a = ac.ac_residual(ctx.obj, W, ctx.grid)
    e = ac.equipartition_residual(ctx.obj, W, ctx.grid)
    return Outcome((a, e), a.passed() and e.passed())


def _sphere_build(params, rng):
    center = params.get("center", (0.0, 0.0, -1.0))
    x = coords()[:3]
    return sqrt(sum(((xi - float(c)) ** 2 for xi, c in zip(x, center)), as_expr(0.0)))


def _sphere_grid(n):
    return Grid((-1.0, -1.0, 0.5), (1.0, 1.0, 2.5), (n or 11,) * 3)


def _sphere_eikonal(ctx):
    return ee.EikonalSolution(ctx.obj, as_expr(1.0), ctx.grid).eikonal_residual()


def _sphere_euler(ctx):
    F = ee.eikonal_to_euler(ee.EikonalSolution(ctx.obj, as_expr(1.0), ctx.grid))
    return ee.euler_residual(F)


def _sphere_equivalence(ctx):
    r = ee.divergence_equivalence_check(ctx.obj, ctx.grid)
    return Outcome((r.divergence, r.curvature), r.consistent, {"consistent": r.consistent})


# -- sigma family ------------------------------------------------------------------------

def _expr_param(params, key, default):
    v = params.get(key)
    if v is None:
        return default
    return from_json(v) if isinstance(v, (dict, str)) else as_expr(v)


def _sigma_build(params, rng):
    c1, c2 = float(params.get("c1", 0.0)), float(params.get("c2", 1.0))
    x = var(0)
    try:
        if c2 == 0:
            return leray.SigmaFamilySpec(c1, c2, A=_expr_param(params, "A", tanh(x)), B=_expr_param(params, "B", sin(x)),
                                         F=_expr_param(params, "F", None), G=_expr_param(params, "G", None))
        return leray.SigmaFamilySpec(c1, c2, F=_expr_param(params, "F", tanh(x)), G=_expr_param(params, "G", sin(x)))
    except ValueError as e:
        raise ParameterError([{"constraint": str(e), "source": "sigma-family", "value": None}]) from None


def _sigma_result(ctx):
    key = ("sigma", ctx.grid)
    if key not in ctx.flags:
        ctx.flags[key] = leray.sigma_family(ctx.obj, ctx.grid)
    return ctx.flags[key]


# -- registry -----------------------------------------------------------------------------

_EULER_CITATIONS = {
    ef.Family.E2D_ISOBARIC: "2D Euler, travelling profile with constant pressure",
    ef.Family.E2D_LINEAR_P: "2D Euler, travelling profile with linear pressure",
    ef.Family.E3D_SOL1: "3D Euler with linear pressure, profile solution 1",
    ef.Family.E3D_SOL2: "3D Euler with linear pressure, profile solution 2",
    ef.Family.E3D_SOL3: "3D Euler with linear pressure, profile solution 3",
    ef.Family.E3D_SOL4: "3D Euler with linear pressure, single-profile solution 4",
    ef.Family.E3D_SOL5: "3D Euler with linear pressure, single-profile solution 5",
}

_NS_CITATIONS = {
    nsf.Family.NS2D: "2D Navier-Stokes, linearly dependent components, heat-equation profile",
    nsf.Family.NS3D: "3D Navier-Stokes, linearly dependent components, reduced parabolic profile",
    nsf.Family.NS3D_IVP: "3D Navier-Stokes initial value problem via the heat kernel",
}


def _registry() -> dict[str, Target]:
    out = {}
    for fam, cit in _EULER_CITATIONS.items():
        out[fam.value] = _euler_target(fam, cit)
    for fam, cit in _NS_CITATIONS.items():
        out[fam.value] = _ns_target(fam, cit)
    for entry in acs.AC_CATALOG:
        out[entry.id] = _ac_target(entry)
    out["ac-tanh-planar"] = Target(
        "ac-tanh-planar", "Scalar Allen-Cahn, planar tanh heteroclinic with its equipartition and flat level sets",
        "allen-cahn", ("direction", "offset"), _planar_build,
        {"allen_cahn": Check(_planar_ac, fd_order=2), "equipartition": Check(_planar_equipartition, fd_order=2),
         "curvature": Check(_planar_curvature), "div_y": Check(_planar_div), "profile": Check(_planar_profile, tol=1e-8)},
        _box(-2.0, 2.0, 3), 11, (0.0,),
    )
    out["radial-candidate"] = Target(
        "radial-candidate", "Scalar Allen-Cahn, radial profile of the distance (negative control)",
        "allen-cahn", ("center", "c"), _radial_build, {"joint": Check(_radial_joint)},
        _box(-1.0, 1.0, 3), 11, (0.0,),
    )
    out["eikonal-sphere"] = Target(
        "eikonal-sphere", "Eikonal distance to a point and its Euler ratio field",
        "eikonal", ("center",), _sphere_build,
        {"eikonal": Check(_sphere_eikonal), "euler": Check(_sphere_euler), "equivalence": Check(_sphere_equivalence)},
        _sphere_grid, 11, (0.0,),
    )
    out["sigma-family"] = Target(
        "sigma-family", "Leray-projected Allen-Cahn identity, explicit stream-function family",
        "leray", ("c1", "c2", "F", "G", "A", "B"), _sigma_build,
        {"linear": Check(lambda c: _sigma_result(c).linear_report),
         "full": Check(lambda c: _sigma_result(c).full_report),
         "printed": Check(lambda c: _sigma_result(c).printed_match)},
        _box(-1.0, 1.0, 2), 21, (0.0,),
    )
    return out


TARGETS: dict[str, Target] = _registry()


def get_target(id: str) -> Target:
    try:
        return TARGETS[id]
    except KeyError:
        raise KeyError(f"unknown target {id!r}") from None
