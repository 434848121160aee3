"""Scalar Allen-Cahn: residuals, equipartition, normalisation, planar
profiles, and the stream function of a three-dimensional solution."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from .fields import (
    ANALYTIC_TOL,
    ClosedForm,
    Grid,
    Partials,
    ResidualReport,
    ScalarField,
    affine,
    as_expr,
    coords,
    first_point,
    from_json,
    sample,
    sqrt,
    tanh,
    to_json,
    var,
)

Field = Union[ClosedForm, ScalarField]

NORMALIZE_EPS = 1e-8
BLOWUP = 1e6


@dataclass(frozen=True)
class Potential1D:
    """``W: R -> [0, inf)`` as a profile in one variable."""

    W: ClosedForm
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "W", as_expr(self.W))

    @property
    def dW(self) -> ClosedForm:
        return self.W.diff(0)

    def value(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.W.evaluate({0: u}), dtype=float), u.shape)

    def derivative(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(np.asarray(self.dW.evaluate({0: u}), dtype=float), u.shape)

    def min_on(self, u) -> float:
        return float(np.min(self.value(u)))

    def scaled(self, factor: float) -> "Potential1D":
        return Potential1D(factor * self.W, f"{factor:g}*{self.name}")

    def to_json(self) -> dict:
        return {"name": self.name, "W": to_json(self.W)}

    @classmethod
    def from_json(cls, d) -> "Potential1D":
        if isinstance(d, str):
            return potential(d)
        if "W" not in d:
            return potential(d["name"])
        return cls(from_json(d["W"]), d.get("name", "custom"))


def double_well() -> Potential1D:
    """``(1 - u^2)^2 / 4``."""
    u = var(0)
    return Potential1D((1.0 - u * u) ** 2 / 4.0, "double_well")


def potential(name: str, W: ClosedForm | None = None) -> Potential1D:
    """Catalog lookup; ``degenerate`` takes a user-supplied ``W``."""
    if name == "double_well":
        return double_well()
    if name == "degenerate":
        if W is None:
            raise ValueError("the degenerate potential needs a user-supplied W")
        return Potential1D(W, "degenerate")
    raise KeyError(f"unknown potential {name!r}")


# -- residuals ---------------------------------------------------------------------

def ac_residual(u: Field, W: Potential1D, grid: Grid | None = None, accuracy: int = 2) -> ResidualReport:
    """``Lap u - W'(u)``."""
    p = Partials(u, grid, accuracy)
    uv = sample(u, p.grid)
    return ResidualReport.of("allen_cahn", p.laplacian() - W.derivative(uv), p.grid)


def equipartition_residual(u: Field, W: Potential1D, grid: Grid | None = None, accuracy: int = 2) -> ResidualReport:
    """``|grad u|^2 / 2 - W(u)``."""
    p = Partials(u, grid, accuracy)
    uv = sample(u, p.grid)
    g2 = sum(g * g for g in p.gradient())
    return ResidualReport.of("equipartition", 0.5 * g2 - W.value(uv), p.grid)


# -- normalisation v = G(u), G' = 1/sqrt(2W) -----------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _normalizer_weight(W: Potential1D, s: np.ndarray, eps: float) -> np.ndarray:
    two_w = 2.0 * W.value(s)
    bad = two_w < eps
    if bad.any():
        raise ValueError(
            f"2W(u) = {float(two_w[bad].flat[0]):.3e} < {eps:g} at u = {float(s[bad].flat[0]):.6g}; "
            "W vanishes on the range of u, which is incompatible with u_(x_n) > 0 and equipartition"
        )
    return 1.0 / np.sqrt(two_w)


def normalize_values(uv: np.ndarray, W: Potential1D, eps: float = NORMALIZE_EPS) -> np.ndarray:
    """``G(u) = int_{min u}^{u} ds / sqrt(2W(s))`` for every entry of ``uv``.

    Composite Gauss-Legendre between consecutive sorted distinct values.
    """
    uv = np.asarray(uv, dtype=float)
    levels, inv = np.unique(uv, return_inverse=True)
    _normalizer_weight(W, levels, eps)
    if levels.size == 1:
        return np.zeros_like(uv)
    lo, hi = levels[:-1], levels[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    seg = half * (_normalizer_weight(W, nodes, eps) @ _GL_WEIGHTS)
    G = np.concatenate([[0.0], np.cumsum(seg)])
    return G[inv].reshape(uv.shape)


def normalize(u: Field, W: Potential1D, grid: Grid | None = None, eps: float = NORMALIZE_EPS) -> ScalarField:
    """The rescaled field ``v = G(u)``; ``|grad v| = 1`` under equipartition."""
    if isinstance(u, ScalarField):
        grid = u.grid
    return ScalarField(grid, normalize_values(sample(u, grid), W, eps))


def normalized_gradient(u: Field, W: Potential1D, grid: Grid | None = None, eps: float = NORMALIZE_EPS,
                        accuracy: int = 2) -> list[np.ndarray]:
    """``grad G(u) = grad u / sqrt(2W(u))`` by the chain rule."""
    p = Partials(u, grid, accuracy)
    w = _normalizer_weight(W, sample(u, p.grid), eps)
    return [w * g for g in p.gradient()]


def normalized_unit_residual(u: Field, W: Potential1D, grid: Grid | None = None) -> ResidualReport:
    """``|grad G(u)|^2 - 1`` via the chain rule."""
    p = Partials(u, grid)
    return ResidualReport.of("normalized_eikonal", sum(g * g for g in normalized_gradient(u, W, p.grid)) - 1.0, p.grid)


# -- planar profiles ---------------------------------------------------------------

class ProfileBlowUpError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlanarProfile:
    """Numerical solution of ``h'' = W'(h) / (a^2 + b^2 + 1)``.

    ``energy_drift`` is the sup over the output nodes of
    ``|(1/2)(a^2+b^2+1) h'^2 - W(h) - E0|``.
    """

    t: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    coeffs: tuple[float, ...]
    energy: float
    energy_drift: float
    _pieces: tuple = ()

    @property
    def scale(self) -> float:
        return 1.0 + sum(c * c for c in self.coeffs)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        for lo, hi, sol in self._pieces:
            m = (t >= lo) & (t <= hi)
            if m.any():
                out[m] = sol(t[m])[0]
        return out

    def direction(self) -> tuple[float, ...]:
        """Unit normal ``(a, b, 1) / |(a, b, 1)|`` of the level planes."""
        v = np.array([*self.coeffs, 1.0])
        return tuple(float(c) for c in v / np.linalg.norm(v))


def solve_profile(
    W: Potential1D,
    a: float = 0.0,
    b: float = 0.0,
    u0: float = 0.0,
    du0: float = 0.0,
    t_range: tuple[float, float] = (-5.0, 5.0),
    t0: float = 0.0,
    rtol: float = 1e-12,
    atol: float = 1e-12,
    n_out: int = 1001,
) -> PlanarProfile:
    """Integrate the planar profile ODE from ``(u0, du0)`` at ``t0`` both ways.

    Uses an adaptive Dormand-Prince 8(5,3) pair with dense output.  Raises
    ``ProfileBlowUpError`` with the escape time when ``|h|`` exceeds 1e6.
    """
    lo, hi = map(float, t_range)
    if not lo <= t0 <= hi:
        raise ValueError("t0 must lie inside t_range")
    k = 1.0 + a * a + b * b

    def rhs(_t, y):
        return [y[1], float(W.derivative(y[0])) / k]

    def escape(_t, y):
        return abs(y[0]) - BLOWUP

    escape.terminal = True
    pieces = []
    for end in (lo, hi):
        if end == t0:
            continue
        sol = solve_ivp(rhs, (t0, end), [u0, du0], method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True, events=escape)
        if sol.status == 1:
            raise ProfileBlowUpError(f"|h| exceeds {BLOWUP:g} at t = {sol.t_events[0][0]:.6g}")
        if sol.status != 0:
            raise RuntimeError(sol.message)
        pieces.append((min(t0, end), max(t0, end), sol.sol))
    ts = np.linspace(lo, hi, n_out)
    h = np.empty_like(ts)
    dh = np.empty_like(ts)
    for plo, phi, s in pieces:
        m = (ts >= plo) & (ts <= phi)
        y = s(ts[m])
        h[m], dh[m] = y[0], y[1]
    E0 = 0.5 * k * du0 * du0 - float(W.value(u0))
    drift = float(np.max(np.abs(0.5 * k * dh * dh - W.value(h) - E0)))
    return PlanarProfile(ts, h, dh, (float(a), float(b)), E0, drift, tuple(pieces))


def shoot_heteroclinic(
    W: Potential1D, well: float, u_mid: float, a: float = 0.0, b: float = 0.0,
    t_range: tuple[float, float] = (-5.0, 5.0), increasing: bool = True,
) -> PlanarProfile:
    """Start at ``u_mid`` on the energy level ``E0 = -W(well)`` of the wells.

    The slope comes from the first integral, so the orbit lies on the
    stable/unstable manifold joining the wells up to integration error.
    """
    k = 1.0 + a * a + b * b
    e = 2.0 * (float(W.value(u_mid)) - float(W.value(well))) / k
    if e < 0:
        raise ValueError("u_mid lies below the well energy")
    du0 = np.sqrt(e) * (1.0 if increasing else -1.0)
    return solve_profile(W, a, b, u_mid, float(du0), t_range)


def planar_field(h: ClosedForm, direction: Sequence[float], offset: float = 0.0) -> ClosedForm:
    """``h(direction . x + offset)``."""
    return as_expr(h)(affine(direction, offset))


def radial_candidate(center: Sequence[float], c: float = 0.0, dims: int = 3) -> ClosedForm:
    """``tanh((|x - x0| + c)/sqrt 2)``: the double-well profile of the distance
    to ``x0``.  It satisfies equipartition but not the Allen-Cahn equation."""
    xs = coords()[:dims]
    r2 = sum(((xi - float(c0)) * (xi - float(c0)) for xi, c0 in zip(xs, center)), as_expr(0.0))
    return tanh((sqrt(r2) + c) / np.sqrt(2.0))


# -- stream function and minimal surface -----------------------------------------

class StreamFunctionError(ValueError):
    """A hypothesis needed for a single-valued stream function fails."""


@dataclass(frozen=True)
class StreamFunctionResult:
    psi: ScalarField
    ms_report: ResidualReport
    path_report: ResidualReport
    div_report: ResidualReport

    def reports(self) -> list[ResidualReport]:
        return [self.div_report, self.path_report, self.ms_report]


def _integrate_psi(F1: np.ndarray, F2: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Two line-integral routes to ``psi`` with ``psi_y = F1, psi_x = -F2``
    and ``psi = 0`` at the lower-left corner.  Arrays are indexed ``[x, y, ...]``."""
    col = cumulative_simpson(F1[0], x=ys, axis=0, initial=0.0)
    psi_a = col[None] + cumulative_simpson(-F2, x=xs, axis=0, initial=0.0)
    row = cumulative_simpson(-F2[:, 0], x=xs, axis=0, initial=0.0)
    psi_b = row[:, None] + cumulative_simpson(F1, x=ys, axis=1, initial=0.0)
    return psi_a, psi_b


def minimal_surface_operator(px, py, pxx, pxy, pyy):
    return pyy * (px * px + 1.0) - 2.0 * px * py * pxy + pxx * (py * py + 1.0)


def stream_function_and_minimal_surface(
    u: Field | None = None,
    grid: Grid | None = None,
    F: tuple | None = None,
    tol: float = ANALYTIC_TOL,
    path_tol: float = 1e-6,
    precheck: bool = True,
    accuracy: int = 4,
    fd_tol: float = 1e-3,
) -> StreamFunctionResult:
    """Recover ``psi`` from ``u`` (or a supplied in-plane field ``F``) on a 3D grid.

    ``psi_y = u_x/u_z`` and ``psi_x = -u_y/u_z`` on each z-slice.  The
    divergence of ``F`` is checked first, then the two integration routes
    must agree within ``path_tol``.  The minimal-surface residual uses exact
    derivatives of ``F`` on the closed-form path and accuracy-4 differences
    of the recovered ``psi`` otherwise.  Sampled input is differentiated
    at ``accuracy`` and its divergence and path checks use ``fd_tol``.
    """
    if F is None:
        p = Partials(u, grid, accuracy)
        grid = p.grid
        if grid.dims != 3:
            raise ValueError("stream function recovery needs a 3D grid")
        where = first_point(p(2) <= 1e-8, grid)
        if where is not None:
            raise StreamFunctionError(f"u_z <= 1e-8 at {where}")
        F = (u.diff(0) / u.diff(2), u.diff(1) / u.diff(2)) if p.analytic else (
            ScalarField(grid, p(0) / p(2)), ScalarField(grid, p(1) / p(2)))
    F = tuple(as_expr(f) if isinstance(f, (int, float)) else f for f in F)
    analytic = all(isinstance(f, ClosedForm) for f in F)
    P1, P2 = Partials(F[0], grid, 4), Partials(F[1], grid, 4)
    div = ResidualReport.of("div_xy_F", P1(0) + P2(1), grid)
    div_tol = tol if analytic else max(tol, fd_tol)
    path_tol = path_tol if analytic else max(path_tol, fd_tol)
    if precheck and not div.passed(div_tol):
        raise StreamFunctionError(
            f"div_(x,y) F = {div.linf:.3e}: F is not divergence-free, so (psi_y, -psi_x) = F has no potential"
        )
    F1, F2 = sample(F[0], grid), sample(F[1], grid)
    psi_a, psi_b = _integrate_psi(F1, F2, grid.axis(0), grid.axis(1))
    path = ResidualReport.of("path_independence", psi_a - psi_b, grid)
    if not path.passed(path_tol):
        raise StreamFunctionError(
            f"line integrals of F differ by {path.linf:.3e}: the curl-free hypothesis fails"
        )
    psi = ScalarField(grid, 0.5 * (psi_a + psi_b))
    if analytic:
        ms = minimal_surface_operator(-F2, F1, -P2(0), P1(0), P1(1))
        ms_rep = ResidualReport.of("minimal_surface", ms, grid)
    else:
        q = Partials(psi, grid, 4)
        ms = minimal_surface_operator(q(0), q(1), q(0, 0), q(0, 1), q(1, 1))
        ms_rep = ResidualReport.of("minimal_surface", ms, grid, note="finite differences of recovered psi")
    return StreamFunctionResult(psi, ms_rep, path, div)
