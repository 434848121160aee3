"""Helmholtz-Leray decomposition on periodic 2D grids and the
potential-free identities of two-component Allen-Cahn solutions.

Any smooth solution of ``Lap u = W_u(u)`` in the plane satisfies

    u1x Lap u1y + u2x Lap u2y = u1y Lap u1x + u2y Lap u2x

whatever ``W`` is.  If ``u`` equals its own Leray projection
``(-sigma_y, sigma_x)`` the identity becomes an equation for ``sigma``, and
``c1 sigma_xy = c2 (sigma_xx - sigma_yy)`` picks out an explicit subclass.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .fields import (
    ClosedForm,
    Grid,
    Partials,
    ResidualReport,
    ScalarField,
    VectorField,
    affine,
    as_expr,
    evaluate_on,
    var,
)

Pair = Union[VectorField, Sequence[ClosedForm]]

_HEADER = struct.Struct("<qqdddd")


# -- spectral decomposition --------------------------------------------------------

def _check_periodic(grid: Grid):
    if grid.dims != 2 or not all(grid.periodic):
        raise ValueError("spectral projection needs a 2D grid periodic on both axes")
    for n in grid.n:
        if n & (n - 1):
            raise ValueError(f"periodic axes need a power-of-two point count, got {n}")


def wavenumbers(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    kx, ky = (2 * math.pi * np.fft.fftfreq(n, d=h) for n, h in zip(grid.n, grid.h))
    return np.meshgrid(kx, ky, indexing="ij")


@dataclass(frozen=True)
class Decomposition:
    grad_part: VectorField
    divfree_part: VectorField
    mean: tuple[float, float]

    def recombine(self) -> np.ndarray:
        m = np.asarray(self.mean)[:, None, None]
        return self.grad_part.values + self.divfree_part.values + m


def helmholtz_decompose(u: VectorField) -> Decomposition:
    """Split ``u`` into gradient, divergence-free and mean parts.

    In Fourier space ``grad_part = k (k . u_hat)/|k|^2`` for ``k != 0``.
    """
    grid = u.grid
    _check_periodic(grid)
    if u.m != 2:
        raise ValueError("expected a two-component field")
    kx, ky = wavenumbers(grid)
    k2 = kx * kx + ky * ky
    k2[0, 0] = 1.0
    uh = np.fft.fft2(u.values, axes=(1, 2))
    mean = (float(uh[0, 0, 0].real / grid.size), float(uh[1, 0, 0].real / grid.size))
    uh[:, 0, 0] = 0.0
    proj = (kx * uh[0] + ky * uh[1]) / k2
    gh = np.stack([kx * proj, ky * proj])
    dh = uh - gh
    grad = np.fft.ifft2(gh, axes=(1, 2)).real
    divfree = np.fft.ifft2(dh, axes=(1, 2)).real
    return Decomposition(VectorField(grid, grad), VectorField(grid, divfree), mean)


def leray_project(u: VectorField) -> VectorField:
    """Divergence-free part plus the mean flow."""
    d = helmholtz_decompose(u)
    m = np.asarray(d.mean)[:, None, None]
    return VectorField(u.grid, d.divfree_part.values + m)


def gradient_project(u: VectorField) -> VectorField:
    return helmholtz_decompose(u).grad_part


def spectral_divergence(u: VectorField) -> np.ndarray:
    _check_periodic(u.grid)
    kx, ky = wavenumbers(u.grid)
    uh = np.fft.fft2(u.values, axes=(1, 2))
    return np.fft.ifft2(1j * (kx * uh[0] + ky * uh[1])).real


def l2_inner(a: VectorField, b: VectorField) -> float:
    """Grid mean of ``a . b``."""
    return float(np.mean(np.sum(a.values * b.values, axis=0)))


def random_bandlimited(grid: Grid, rng: np.random.Generator, kmax: int = 8) -> VectorField:
    """Two components of random Fourier modes with ``|k_i| <= kmax``."""
    _check_periodic(grid)
    X, Y = grid.mesh
    Lx, Ly = (hi - lo for lo, hi in zip(grid.lo, grid.hi))
    comps = []
    for _ in range(2):
        f = np.full(grid.shape, rng.normal())
        for p in range(-kmax, kmax + 1):
            for q in range(0, kmax + 1):
                if q == 0 and p <= 0:
                    continue
                amp = rng.normal(size=2) / (1.0 + p * p + q * q)
                ph = 2 * math.pi * (p * (X - grid.lo[0]) / Lx + q * (Y - grid.lo[1]) / Ly)
                f = f + amp[0] * np.cos(ph) + amp[1] * np.sin(ph)
        comps.append(f)
    return VectorField(grid, np.stack(comps))


# -- binary interchange -----------------------------------------------------------

def dump_periodic(u: VectorField, path: str | Path) -> None:
    """Header ``<qqdddd`` (n_x, n_y, lo_x, lo_y, hi_x, hi_y), then both
    components as little-endian float64 in row-major order."""
    _check_periodic(u.grid)
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.n[0], g.n[1], g.lo[0], g.lo[1], g.hi[0], g.hi[1]))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C"))


def load_periodic(path: str | Path) -> VectorField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated header")
    nx, ny, lx, ly, hx, hy = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * nx * ny:
        raise ValueError(f"expected {2 * nx * ny} values, found {body.size}")
    grid = Grid((lx, ly), (hx, hy), (nx, ny), (True, True))
    return VectorField(grid, body.reshape(2, nx, ny).astype(float))


# -- the potential-free identity --------------------------------------------------------

def cross_identity_residual(u: Pair, grid: Grid | None = None, accuracy: int = 4) -> ResidualReport:
    """``u1x Lap u1y + u2x Lap u2y - u1y Lap u1x - u2y Lap u2x``.

    Closed forms are differentiated exactly; sampled fields use
    finite differences (accuracy 4 by default, since third derivatives enter).
    """
    if isinstance(u, VectorField):
        grid = u.grid
        comps = [u.component(0), u.component(1)]
    else:
        comps = [as_expr(c) for c in u]
    r = 0.0
    for c in comps:
        p = Partials(c, grid, accuracy)
        lap_x = p(0, 0, 0) + p(0, 1, 1)
        lap_y = p(0, 0, 1) + p(1, 1, 1)
        r = r + p(0) * lap_y - p(1) * lap_x
    note = "analytic" if not isinstance(u, VectorField) else f"finite differences, accuracy {accuracy}"
    return ResidualReport.of("cross_identity", r, grid, note=note)


def _sigma_equation(s: ClosedForm) -> ClosedForm:
    """``(s_xx - s_yy) Lap s_xy - s_xy Lap (s_xx - s_yy)``."""
    sxy = s.diff(0).diff(1)
    dd = s.diff(0).diff(0) - s.diff(1).diff(1)
    lap = lambda e: e.diff(0).diff(0) + e.diff(1).diff(1)
    return dd * lap(sxy) - sxy * lap(dd)


def gradient_projection_check(phi: ClosedForm, grid: Grid) -> ResidualReport:
    """Residual of the same equation for the potential ``phi`` of the gradient part."""
    return ResidualReport.of("gradient_projection", evaluate_on(_sigma_equation(as_expr(phi)), grid), grid)


def wave_potential(F: ClosedForm, G: ClosedForm) -> ClosedForm:
    """``F(x + y) + G(x - y)``, for which ``phi_xx = phi_yy``."""
    return as_expr(F)(affine([1.0, 1.0])) + as_expr(G)(affine([1.0, -1.0]))


# -- the explicit sigma family -------------------------------------------------------

@dataclass(frozen=True)
class SigmaFamilySpec:
    """``c2 != 0``: profiles ``F``, ``G`` and ``sigma = F(cx + y) + G(x - cy)``.
    ``c2 == 0``: profiles ``A``, ``B`` and ``sigma = A(x) + B(y)``."""

    c1: float
    c2: float
    F: ClosedForm | None = None
    G: ClosedForm | None = None
    A: ClosedForm | None = None
    B: ClosedForm | None = None

    def __post_init__(self):
        object.__setattr__(self, "c1", float(self.c1))
        object.__setattr__(self, "c2", float(self.c2))
        for name in ("F", "G", "A", "B"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, as_expr(v))
        if self.c2 == 0:
            if self.F is not None or self.G is not None:
                raise ValueError("c2 = 0 has no root c; use sigma = A(x) + B(y) with profiles A, B")
            if self.A is None or self.B is None:
                raise ValueError("c2 = 0 needs profiles A and B")
        elif self.F is None or self.G is None:
            raise ValueError("c2 != 0 needs profiles F and G")

    @property
    def c(self) -> float:
        if self.c2 == 0:
            raise ValueError("c is undefined for c2 = 0")
        return (self.c1 + math.sqrt(self.c1 ** 2 + 4 * self.c2 ** 2)) / (2 * self.c2)

    def root_residual(self) -> float:
        c = self.c
        return self.c2 * c * c - self.c1 * c - self.c2

    def sigma(self) -> ClosedForm:
        if self.c2 == 0:
            return self.A(var(0)) + self.B(var(1))
        c = self.c
        return self.F(affine([c, 1.0])) + self.G(affine([1.0, -c]))

    def printed_v(self) -> tuple[ClosedForm, ClosedForm]:
        """The projected field written through profile derivatives.

        ``c2 = 0``: ``(b(y), a(x))`` with ``a = A'`` and ``b = -B'``.
        ``c2 != 0``: ``(c g(x - cy) - f(cx + y), g(x - cy) + c f(cx + y))``
        with ``f = F'`` and ``g = G'``.
        """
        if self.c2 == 0:
            return -self.B.diff(0)(var(1)), self.A.diff(0)(var(0))
        c = self.c
        f = self.F.diff(0)(affine([c, 1.0]))
        g = self.G.diff(0)(affine([1.0, -c]))
        return c * g - f, g + c * f


@dataclass(frozen=True)
class SigmaResult:
    sigma: ScalarField
    v: VectorField
    linear_report: ResidualReport
    full_report: ResidualReport
    printed_match: ResidualReport
    c: float | None

    def reports(self) -> list[ResidualReport]:
        return [self.linear_report, self.full_report, self.printed_match]


def sigma_reports(s: ClosedForm, c1: float, c2: float, grid: Grid) -> tuple[ResidualReport, ResidualReport]:
    """Residuals of ``c1 s_xy = c2 (s_xx - s_yy)`` and of the full sigma equation."""
    s = as_expr(s)
    lin = c1 * s.diff(0).diff(1) - c2 * (s.diff(0).diff(0) - s.diff(1).diff(1))
    return (
        ResidualReport.of("sigma_linear", evaluate_on(lin, grid), grid),
        ResidualReport.of("sigma_full", evaluate_on(_sigma_equation(s), grid), grid),
    )


def sigma_family(spec: SigmaFamilySpec, grid: Grid) -> SigmaResult:
    s = spec.sigma()
    v = (-s.diff(1), s.diff(0))
    lin, full = sigma_reports(s, spec.c1, spec.c2, grid)
    pv = spec.printed_v()
    diff = np.stack([evaluate_on(a - b, grid) for a, b in zip(v, pv)])
    match = ResidualReport.of("printed_form", diff, grid)
    vf = VectorField(grid, np.stack([evaluate_on(c, grid) for c in v]))
    return SigmaResult(ScalarField(grid, evaluate_on(s, grid)), vf, lin, full, match,
                       None if spec.c2 == 0 else spec.c)
