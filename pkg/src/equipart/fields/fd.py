"""Finite-difference derivatives on uniform grids.

Interior points use centred stencils; non-periodic boundaries use one-sided
stencils of the same formal accuracy (``order + accuracy`` points).
"""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import Grid, ScalarField, VectorField


@lru_cache(maxsize=None)
def fornberg_weights(order: int, offsets: tuple[float, ...], x0: float = 0.0) -> np.ndarray:
    """Weights for the ``order``-th derivative at ``x0`` from samples at ``offsets``.

    Fornberg's recursion (Math. Comp. 51, 1988), exact in rational arithmetic
    up to rounding.
    """
    n = len(offsets)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, offsets[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, offsets[i] - x0
        for j in range(i):
            c3 = offsets[i] - offsets[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    w = c[:, order].copy()
    w.setflags(write=False)
    return w


def _central_half_width(order: int, accuracy: int) -> int:
    return (2 * ((order + 1) // 2) - 1 + accuracy) // 2


def min_points(order: int, accuracy: int) -> int:
    return accuracy + order + 1


def fd_array(values: np.ndarray, grid: Grid, axis: int, order: int = 1, accuracy: int = 2) -> np.ndarray:
    """Derivative of a raw sampled array along one grid axis."""
    if not 0 <= axis < grid.dims:
        raise ValueError(f"axis {axis} out of range for a {grid.dims}-D grid")
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if accuracy not in (2, 4):
        raise ValueError("accuracy must be 2 or 4")
    n = grid.n[axis]
    if n < max(8, min_points(order, accuracy)):
        raise ValueError(f"axis {axis} has {n} points; need at least {max(8, min_points(order, accuracy))}")
    h = grid.h[axis]
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    half = _central_half_width(order, accuracy)
    w = fornberg_weights(order, tuple(float(k) for k in range(-half, half + 1)))
    out = np.zeros_like(f)
    if grid.periodic[axis]:
        for k, wk in zip(range(-half, half + 1), w):
            out += wk * np.roll(f, -k, axis=0)
    else:
        for k, wk in zip(range(-half, half + 1), w):
            out[half:n - half] += wk * f[half + k:n - half + k]
        m = order + accuracy
        for i in list(range(half)) + list(range(n - half, n)):
            start = 0 if i < half else n - m
            idx = np.arange(start, start + m)
            wb = fornberg_weights(order, tuple(float(j - i) for j in idx))
            out[i] = np.tensordot(wb, f[idx], axes=(0, 0))
    return np.moveaxis(out / h**order, 0, axis)


def fd_partial(values: np.ndarray, grid: Grid, axes_seq: Sequence[int], accuracy: int = 2) -> np.ndarray:
    """Mixed partial derivative, one axis at a time.

    Repeats along an axis use a single stencil of that order (up to 3), since
    composing one-sided boundary stencils costs an order of accuracy.
    """
    counts = [0] * grid.dims
    for a in axes_seq:
        if not 0 <= a < grid.dims:
            raise ValueError(f"axis {a} out of range for a {grid.dims}-D grid")
        counts[a] += 1
    out = np.asarray(values, dtype=float)
    for a, k in enumerate(counts):
        while k > 0:
            step = min(k, 3)
            out = fd_array(out, grid, a, step, accuracy)
            k -= step
    return out


def fd_derivative(f: ScalarField, axis: int, order: int = 1, accuracy: int = 2) -> ScalarField:
    return ScalarField(f.grid, fd_array(f.values, f.grid, axis, order, accuracy))


def grad(f: ScalarField, accuracy: int = 2) -> VectorField:
    return VectorField(f.grid, np.stack([fd_array(f.values, f.grid, a, 1, accuracy) for a in range(f.grid.dims)]))


def laplacian(f: ScalarField | VectorField, accuracy: int = 2):
    g = f.grid
    if isinstance(f, VectorField):
        return VectorField(g, np.stack([laplacian(f.component(i), accuracy).values for i in range(f.m)]))
    return ScalarField(g, sum(fd_array(f.values, g, a, 2, accuracy) for a in range(g.dims)))


def divergence(f: VectorField, accuracy: int = 2) -> ScalarField:
    g = f.grid
    if f.m != g.dims:
        raise ValueError(f"divergence needs {g.dims} components, field has {f.m}")
    return ScalarField(g, sum(fd_array(f.values[a], g, a, 1, accuracy) for a in range(g.dims)))
