"""Explicit Euler solutions with pressure linear in space.

Seven families are generated from constants, one-variable profiles and
time functions ``a(t)``, ``b(t)`` with ``A' = a`` and ``A(0) = 0``:

* ``E2D_ISOBARIC``  ``u = c g(beta x + gamma y - (beta ct1 + gamma ct2) t) + ct``, ``p = b(t)``
* ``E2D_LINEAR_P``  as above plus ``(lambda, xi) A(t)``, ``p = -a(t)(lambda x + xi y) + b(t)``
* ``E3D_SOL1..3``   travelling profiles ``G``, ``H`` of ``c1 t - y + c2 z`` and its cyclic images
* ``E3D_SOL4``      a special case of ``E3D_SOL5``
* ``E3D_SOL5``      ``u1 = G(phase) - A(t)``, ``u2 = c1 u1 + ct1``, ``u3 = c2 u1 + ct2``
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

import numpy as np

from .fields import (
    TIME_AXIS,
    ClosedForm,
    Grid,
    ResidualReport,
    affine,
    antiderivative,
    as_expr,
    coords,
    cos,
    from_json,
    sin,
    tanh,
    to_json,
    var,
)
from .flows import FlowSolution, flow_residual

CONSTRAINT_TOL = 1e-12


class Family(str, Enum):
    E2D_ISOBARIC = "E2D_ISOBARIC"
    E2D_LINEAR_P = "E2D_LINEAR_P"
    E3D_SOL1 = "E3D_SOL1"
    E3D_SOL2 = "E3D_SOL2"
    E3D_SOL3 = "E3D_SOL3"
    E3D_SOL4 = "E3D_SOL4"
    E3D_SOL5 = "E3D_SOL5"

    @property
    def dims(self) -> int:
        return 2 if self.value.startswith("E2D") else 3


PARAM_NAMES = ("c1", "c2", "ct1", "ct2", "beta", "gamma", "lam", "xi", "k", "l", "C")
PROFILE_NAMES = {
    Family.E2D_ISOBARIC: ("g",),
    Family.E2D_LINEAR_P: ("g",),
    Family.E3D_SOL1: ("G", "H"),
    Family.E3D_SOL2: ("G", "H"),
    Family.E3D_SOL3: ("G", "H"),
    Family.E3D_SOL4: ("G",),
    Family.E3D_SOL5: ("G",),
}
_JSON_ALIASES = {"lambda": "lam", "c~1": "ct1", "c~2": "ct2", "c1t": "ct1", "c2t": "ct2"}


def time_function(e) -> ClosedForm:
    """A function of time only.  A profile written in ``x`` is read as ``t``."""
    e = as_expr(e)
    axes = e.axes()
    if axes <= {TIME_AXIS}:
        return e
    if len(axes) == 1:
        return e.substitute({next(iter(axes)): var(TIME_AXIS)})
    raise ValueError(f"time function depends on several variables: {e}")


@dataclass(frozen=True)
class Violation:
    constraint: str
    source: str
    value: float

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "source": self.source, "value": self.value}

    def __str__(self):
        return f"{self.constraint} violated ({self.source}): residual {self.value:.3e}"


@dataclass(frozen=True)
class EulerFamilySpec:
    """Tagged parameters of one family.  ``C`` defaults to ``-c1/c2``."""

    family: Family
    c1: float = 0.0
    c2: float = 0.0
    ct1: float = 0.0
    ct2: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    lam: float = 0.0
    xi: float = 0.0
    k: float = 0.0
    l: float = 0.0
    C: float | None = None
    profiles: Mapping[str, ClosedForm] = field(default_factory=dict)
    a: ClosedForm = field(default_factory=lambda: as_expr(0.0))
    b: ClosedForm = field(default_factory=lambda: as_expr(0.0))

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, float(v))
        object.__setattr__(self, "profiles", {k: as_expr(v) for k, v in dict(self.profiles).items()})
        object.__setattr__(self, "a", time_function(self.a))
        object.__setattr__(self, "b", time_function(self.b))

    def profile(self, name: str) -> ClosedForm:
        try:
            return self.profiles[name]
        except KeyError:
            raise ValueError(f"{self.family.value} needs profile {name!r}") from None

    @property
    def C_value(self) -> float:
        if self.C is not None:
            return self.C
        if self.c2 == 0:
            raise ValueError("C = -c1/c2 needs c2 != 0")
        return -self.c1 / self.c2

    def to_json(self) -> dict:
        d = {"family": self.family.value}
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        d["profiles"] = {k: to_json(v) for k, v in sorted(self.profiles.items())}
        d["a"] = to_json(self.a)
        d["b"] = to_json(self.b)
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "EulerFamilySpec":
        kw = {}
        for key, v in d.items():
            key = _JSON_ALIASES.get(key, key)
            if key in PARAM_NAMES:
                kw[key] = v
            elif key == "profiles":
                kw["profiles"] = {k: from_json(p) for k, p in v.items()}
            elif key in ("a", "b"):
                kw[key] = from_json(v)
            elif key not in ("family",):
                raise ValueError(f"unknown field {key!r} in family spec")
        return cls(Family(d["family"]), **kw)


# -- constraints ----------------------------------------------------------------

def validate_params(spec: EulerFamilySpec, tol: float = CONSTRAINT_TOL) -> list[Violation]:
    """Algebraic constraints of the family; an empty list means valid."""
    out: list[Violation] = []
    f = spec.family
    if f in (Family.E2D_ISOBARIC, Family.E2D_LINEAR_P):
        r = spec.c1 * spec.beta + spec.c2 * spec.gamma
        if abs(r) > tol:
            out.append(Violation("c1*beta + c2*gamma = 0", "2D travelling-profile family", r))
        if f is Family.E2D_LINEAR_P:
            r = spec.lam * spec.beta + spec.xi * spec.gamma
            if abs(r) > tol:
                out.append(Violation("lambda*beta + xi*gamma = 0", "2D family with linear pressure", r))
    elif f in (Family.E3D_SOL1, Family.E3D_SOL2, Family.E3D_SOL3):
        if spec.c2 == 0:
            out.append(Violation("c2 != 0", "3D profile families dividing by c2", 0.0))
        elif spec.C is not None:
            r = spec.C + spec.c1 / spec.c2
            if abs(r) > tol:
                out.append(Violation("C = -c1/c2", "3D profile families", r))
    for name in PROFILE_NAMES[f]:
        if name not in spec.profiles:
            out.append(Violation(f"profile {name} supplied", f.value, float("nan")))
    return out


def sol4_to_sol5(spec: EulerFamilySpec) -> EulerFamilySpec:
    """``E3D_SOL4`` is ``E3D_SOL5`` with ``k = -2 ct1 c2^2`` and ``l = 2 c1^2 ct2``."""
    if spec.family is not Family.E3D_SOL4:
        raise ValueError("expected an E3D_SOL4 spec")
    k = -2.0 * spec.ct1 * spec.c2 ** 2
    l = 2.0 * spec.c1 ** 2 * spec.ct2
    return replace(spec, family=Family.E3D_SOL5, k=k, l=l)


def sol4_phase(spec: EulerFamilySpec) -> ClosedForm:
    """The travelling phase of ``E3D_SOL4`` written out term by term."""
    c1, c2, d1, d2 = spec.c1, spec.c2, spec.ct1, spec.ct2
    return affine(
        [2 * c1 * c2 * (c1 * d2 - c2 * d1), 2 * d1 * c2 ** 2, -2 * c1 ** 2 * d2, 2 * ((c1 * d2) ** 2 - (c2 * d1) ** 2)]
    )


def sol5_phase(spec: EulerFamilySpec) -> ClosedForm:
    k, l = spec.k, spec.l
    return affine([k * spec.c1 + l * spec.c2, -k, -l, k * spec.ct1 + l * spec.ct2])


# -- generation ---------------------------------------------------------------------

def build(spec: EulerFamilySpec, check: bool = True) -> FlowSolution:
    """Closed-form velocity and pressure of a family instance."""
    if check:
        bad = validate_params(spec)
        if bad:
            raise ValueError("; ".join(str(v) for v in bad))
    f = spec.family
    a, b = spec.a, spec.b
    A = antiderivative(a, TIME_AXIS)
    x, y, z, t = coords()
    if f in (Family.E2D_ISOBARIC, Family.E2D_LINEAR_P):
        speed = spec.beta * spec.ct1 + spec.gamma * spec.ct2
        gp = spec.profile("g")(affine([spec.beta, spec.gamma, 0.0, -speed]))
        u1 = spec.c1 * gp + spec.ct1
        u2 = spec.c2 * gp + spec.ct2
        if f is Family.E2D_ISOBARIC:
            return FlowSolution((u1, u2), b, name=f.value)
        u1 = u1 + spec.lam * A
        u2 = u2 + spec.xi * A
        p = -a * (spec.lam * x + spec.xi * y) + b
        return FlowSolution((u1, u2), p, name=f.value)
    if f in (Family.E3D_SOL1, Family.E3D_SOL2, Family.E3D_SOL3):
        c1, c2 = spec.c1, spec.c2
        if c2 == 0:
            raise ValueError(f"{f.value} divides by c2; c2 must be nonzero")
        C = spec.C_value
        # (along, minus, plus) axes of the phase c1 t - minus + c2 plus
        along, minus, plus = {Family.E3D_SOL1: (0, 1, 2), Family.E3D_SOL2: (1, 2, 0), Family.E3D_SOL3: (2, 0, 1)}[f]
        coef = [0.0, 0.0, 0.0, c1]
        coef[minus], coef[plus] = -1.0, c2
        phase = affine(coef)
        G, H = spec.profile("G")(phase), spec.profile("H")(phase)
        u = [None, None, None]
        u[along] = G
        u[minus] = H - A
        u[plus] = (H - A) / c2 + C
        xs = (x, y, z)
        p = a * (xs[minus] + xs[plus] / c2) + b
        return FlowSolution(tuple(u), p, name=f.value)
    if f is Family.E3D_SOL4:
        flow = build(sol4_to_sol5(spec), check=False)
        return replace(flow, name=f.value)
    u1 = spec.profile("G")(sol5_phase(spec)) - A
    u2 = spec.c1 * u1 + spec.ct1
    u3 = spec.c2 * u1 + spec.ct2
    p = a * (x + spec.c1 * y + spec.c2 * z) + b
    return FlowSolution((u1, u2, u3), p, name=f.value)


def generate(spec: EulerFamilySpec, grid: Grid, t: float) -> dict:
    """Sampled ``u`` and ``p`` at time ``t``."""
    u, p = build(spec).sample(grid, t)
    return {"u": u, "p": p}


def euler_residual_with_pressure(flow: FlowSolution, grid: Grid, t: float, path: str = "analytic",
                                 accuracy: int = 2, delta: float = 1e-4) -> ResidualReport:
    """Momentum and incompressibility residuals, max reported.

    ``path='analytic'`` differentiates the closed forms; ``path='fd'`` samples
    on the grid and uses finite differences with a centred time step ``delta``.
    """
    return flow_residual(flow, grid, t, path, accuracy, delta)


# -- initial data ------------------------------------------------------------------

@dataclass(frozen=True)
class InitialCheck:
    ok: bool
    reports: tuple[ResidualReport, ...]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "reports": [r.to_dict() for r in self.reports]}


def theorem2_ic_check(spec: EulerFamilySpec, grid: Grid, tol: float = 1e-12) -> InitialCheck:
    """Compare ``u(., 0)`` with the two admissible initial-data forms.

    ``E3D_SOL5`` (and ``E3D_SOL4``) start from ``(g1, c1 g1 + ct1, c2 g1 + ct2)``
    with ``g1 = G([k c1 + l c2] x - k y - l z)``.  ``E3D_SOL1`` starts from
    ``(G(c2 z - y), H(c2 z - y), H(c2 z - y)/c2 - c1/c2)``.
    """
    flow = build(spec)
    vals = [np.broadcast_to(np.asarray(c.evaluate(grid.env(0.0)), dtype=float), grid.shape) for c in flow.u]
    reps = []
    if spec.family in (Family.E3D_SOL4, Family.E3D_SOL5):
        s5 = sol4_to_sol5(spec) if spec.family is Family.E3D_SOL4 else spec
        g1 = s5.profile("G")(affine([s5.k * s5.c1 + s5.l * s5.c2, -s5.k, -s5.l]))
        g1v = np.broadcast_to(np.asarray(g1.evaluate(grid.env()), dtype=float), grid.shape)
        reps.append(ResidualReport.of("u1 - g1", vals[0] - g1v, grid))
        reps.append(ResidualReport.of("u2 - (c1 u1 + ct1)", vals[1] - (spec.c1 * vals[0] + spec.ct1), grid))
        reps.append(ResidualReport.of("u3 - (c2 u1 + ct2)", vals[2] - (spec.c2 * vals[0] + spec.ct2), grid))
    elif spec.family is Family.E3D_SOL1:
        phase = affine([0.0, -1.0, spec.c2])
        env = grid.env()
        G0 = np.broadcast_to(np.asarray(spec.profile("G")(phase).evaluate(env), dtype=float), grid.shape)
        H0 = np.broadcast_to(np.asarray(spec.profile("H")(phase).evaluate(env), dtype=float), grid.shape)
        reps.append(ResidualReport.of("u1 - G(c2 z - y)", vals[0] - G0, grid))
        reps.append(ResidualReport.of("u2 - H(c2 z - y)", vals[1] - H0, grid))
        reps.append(ResidualReport.of("u3 - (u2/c2 - c1/c2)", vals[2] - (vals[1] / spec.c2 - spec.c1 / spec.c2), grid))
    else:
        raise ValueError("initial-data forms are stated for E3D_SOL5 (E3D_SOL4) and E3D_SOL1")
    return InitialCheck(all(r.passed(tol) for r in reps), tuple(reps))


# -- time translation ---------------------------------------------------------------

def shift_time(spec: EulerFamilySpec, s: float) -> EulerFamilySpec:
    """A 2D spec whose solution at ``t`` equals the original at ``t + s``.

    Requires ``a`` constant, so that ``A(t + s) = A(t) + a s`` folds into the
    constant velocities without changing the travelling speed.
    """
    if spec.family not in (Family.E2D_ISOBARIC, Family.E2D_LINEAR_P):
        raise ValueError("time shift is implemented for the 2D families")
    if spec.a.axes():
        raise ValueError("time shift needs a constant a(t)")
    alpha = float(spec.a.evaluate({}))
    speed = spec.beta * spec.ct1 + spec.gamma * spec.ct2
    g = spec.profile("g")(var(0) - speed * s)
    shift = alpha * s if spec.family is Family.E2D_LINEAR_P else 0.0
    b = spec.b.substitute({TIME_AXIS: var(TIME_AXIS) + s})
    return replace(spec, ct1=spec.ct1 + spec.lam * shift, ct2=spec.ct2 + spec.xi * shift,
                   profiles={**spec.profiles, "g": g}, b=b)


# -- random instances ---------------------------------------------------------------

def _profile_pool():
    s = var(0)
    return [sin(s), tanh(s), cos(s), 1.0 / (1.0 + s * s), sin(s) * tanh(0.5 * s)]


def _time_pool():
    t = var(TIME_AXIS)
    return [as_expr(0.0), as_expr(0.7), cos(t), t, 1.0 / (1.0 + t * t)]


def _nonzero(rng, lo=0.5, hi=2.0) -> float:
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi))


def random_spec(family: Family | str, rng: np.random.Generator) -> EulerFamilySpec:
    """A valid instance with O(1) constants and profiles drawn from a fixed pool."""
    family = Family(family)
    prof, tf = _profile_pool(), _time_pool()
    pick = lambda pool: pool[int(rng.integers(len(pool)))]
    a, b = pick(tf), pick(tf)
    if family in (Family.E2D_ISOBARIC, Family.E2D_LINEAR_P):
        beta, gamma = _nonzero(rng), _nonzero(rng)
        r, q = _nonzero(rng), _nonzero(rng)
        return EulerFamilySpec(
            family, c1=gamma * r, c2=-beta * r, ct1=rng.uniform(-1, 1), ct2=rng.uniform(-1, 1),
            beta=beta, gamma=gamma, lam=gamma * q if family is Family.E2D_LINEAR_P else 0.0,
            xi=-beta * q if family is Family.E2D_LINEAR_P else 0.0,
            profiles={"g": pick(prof)}, a=a, b=b,
        )
    if family in (Family.E3D_SOL1, Family.E3D_SOL2, Family.E3D_SOL3):
        return EulerFamilySpec(family, c1=rng.uniform(-2, 2), c2=_nonzero(rng),
                               profiles={"G": pick(prof), "H": pick(prof)}, a=a, b=b)
    kw = dict(c1=rng.uniform(-1.2, 1.2), c2=rng.uniform(-1.2, 1.2), ct1=rng.uniform(-1, 1), ct2=rng.uniform(-1, 1))
    if family is Family.E3D_SOL5:
        kw.update(k=rng.uniform(-2, 2), l=rng.uniform(-2, 2))
    return EulerFamilySpec(family, profiles={"G": pick(prof)}, a=a, b=b, **kw)
