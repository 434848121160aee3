"""Velocity/pressure pairs and their Euler or Navier-Stokes residuals.

Space axes are 0..dims-1 and time is axis 3, matching the closed-form
kernel.  The analytic path differentiates the closed forms; the sampled
path uses finite differences in space and a centred difference in time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import (
    TIME_AXIS,
    ClosedForm,
    Grid,
    ResidualReport,
    ScalarField,
    VectorField,
    as_expr,
    evaluate_on,
    fd_partial,
)

# centred time stencils: offsets in units of delta and their weights
_TIME_STENCILS = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1 / 12, -2 / 3, 2 / 3, -1 / 12)),
}


@dataclass(frozen=True)
class FlowSolution:
    """``u`` (one closed form per space axis) and pressure ``p``."""

    u: tuple[ClosedForm, ...]
    p: ClosedForm
    viscosity: float = 0.0
    name: str = ""
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(as_expr(c) for c in self.u))
        object.__setattr__(self, "p", as_expr(self.p))

    @property
    def dims(self) -> int:
        return len(self.u)

    def sample(self, grid: Grid, t: float) -> tuple[VectorField, ScalarField]:
        self._check_grid(grid)
        u = VectorField(grid, np.stack([evaluate_on(c, grid, t) for c in self.u]))
        return u, ScalarField(grid, evaluate_on(self.p, grid, t))

    def _check_grid(self, grid: Grid):
        if grid.dims != self.dims:
            raise ValueError(f"{self.dims}-D flow sampled on a {grid.dims}-D grid")


def _momentum_names(dims):
    return [f"momentum_{'xyz'[i]}" for i in range(dims)]


def analytic_residual(flow: FlowSolution, grid: Grid, t: float, name: str = "") -> ResidualReport:
    """Exact momentum and divergence residuals at time ``t``."""
    flow._check_grid(grid)
    d, nu = flow.dims, flow.viscosity
    parts = []
    for i, ui in enumerate(flow.u):
        r = ui.diff(TIME_AXIS) + flow.p.diff(i)
        for j, uj in enumerate(flow.u):
            r = r + uj * ui.diff(j)
        if nu:
            lap = ui.diff(0).diff(0)
            for a in range(1, d):
                lap = lap + ui.diff(a).diff(a)
            r = r - nu * lap
        parts.append(ResidualReport.of(_momentum_names(d)[i], evaluate_on(r, grid, t), grid))
    div = flow.u[0].diff(0)
    for a in range(1, d):
        div = div + flow.u[a].diff(a)
    parts.append(ResidualReport.of("divergence", evaluate_on(div, grid, t), grid))
    return ResidualReport.combine(name or flow.name or "flow", parts, note="analytic")


def sampled_residual(
    u_at: Callable[[float], Sequence[np.ndarray]],
    p_at: Callable[[float], np.ndarray],
    grid: Grid,
    t: float,
    viscosity: float = 0.0,
    accuracy: int = 2,
    delta: float = 1e-4,
    time_order: int = 2,
    name: str = "flow",
) -> ResidualReport:
    """Finite-difference residuals from samplers of ``u`` and ``p`` at any time."""
    offsets, weights = _TIME_STENCILS[time_order]
    u = [np.asarray(c, dtype=float) for c in u_at(t)]
    p = np.asarray(p_at(t), dtype=float)
    shifted = [u_at(t + k * delta) for k in offsets]
    d = grid.dims
    parts = []
    for i in range(d):
        ut = sum(w * np.asarray(s[i]) for w, s in zip(weights, shifted)) / delta
        r = ut + fd_partial(p, grid, (i,), accuracy)
        for j in range(d):
            r = r + u[j] * fd_partial(u[i], grid, (j,), accuracy)
        if viscosity:
            r = r - viscosity * sum(fd_partial(u[i], grid, (a, a), accuracy) for a in range(d))
        parts.append(ResidualReport.of(_momentum_names(d)[i], r, grid))
    div = sum(fd_partial(u[a], grid, (a,), accuracy) for a in range(d))
    parts.append(ResidualReport.of("divergence", div, grid))
    return ResidualReport.combine(name, parts, note=f"finite differences, accuracy {accuracy}, dt {delta:g}")


def flow_residual(flow: FlowSolution, grid: Grid, t: float, path: str = "analytic", accuracy: int = 2,
                  delta: float = 1e-4) -> ResidualReport:
    if path == "analytic":
        return analytic_residual(flow, grid, t)
    if path != "fd":
        raise ValueError(f"unknown path {path!r}")
    flow._check_grid(grid)
    return sampled_residual(
        lambda s: [evaluate_on(c, grid, s) for c in flow.u],
        lambda s: evaluate_on(flow.p, grid, s),
        grid, t, flow.viscosity, accuracy, delta, name=flow.name or "flow",
    )


def divergence_report(flow: FlowSolution, grid: Grid, t: float) -> ResidualReport:
    div = flow.u[0].diff(0)
    for a in range(1, flow.dims):
        div = div + flow.u[a].diff(a)
    return ResidualReport.of("divergence", evaluate_on(div, grid, t), grid)
