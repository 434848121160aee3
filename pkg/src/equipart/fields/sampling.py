"""Evaluate fields and their partial derivatives on a grid.

Two paths share one interface: closed forms are differentiated exactly,
sampled fields with finite differences.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .closedform import ClosedForm, ClosedFormError, as_expr
from .fd import fd_partial
from .grid import Grid, ScalarField

Field = Union[ClosedForm, ScalarField]


def evaluate_on(e: ClosedForm, grid: Grid, t: float | None = None) -> np.ndarray:
    """Values of ``e`` at every grid point, shaped like the grid."""
    try:
        vals = e.evaluate(grid.env(t))
    except ClosedFormError as exc:
        if exc.index is not None and len(exc.index) == grid.dims:
            raise ClosedFormError(f"{exc} at point {grid.point(exc.index)}", exc.index) from None
        raise
    out = np.broadcast_to(np.asarray(vals, dtype=float), grid.shape)
    if not np.all(np.isfinite(out)):
        bad = np.unravel_index(int(np.argmax(~np.isfinite(out))), grid.shape)
        raise ClosedFormError(f"non-finite value of {e} at point {grid.point(bad)}", bad)
    return out


def eval_closed_form(e: ClosedForm, grid: Grid, deriv: Sequence[int] = (), t: float | None = None) -> ScalarField:
    """Exact derivative ``d^deriv e`` sampled on ``grid``.

    ``deriv`` is a multi-index of per-axis derivative counts, total order at
    most 3.
    """
    deriv = tuple(int(k) for k in deriv)
    if any(k < 0 for k in deriv) or sum(deriv) > 3:
        raise ValueError("derivative multi-index must be non-negative with total order <= 3")
    axes_seq = [a for a, k in enumerate(deriv) for _ in range(k)]
    return ScalarField(grid, evaluate_on(as_expr(e).derivative(axes_seq), grid, t))


class Partials:
    """Callable ``p(*axes)`` returning the sampled partial along ``axes``.

    Results are memoised per sorted axes tuple.
    """

    def __init__(self, u: Field, grid: Grid | None = None, accuracy: int = 2, t: float | None = None):
        if isinstance(u, ScalarField):
            grid = grid or u.grid
            if grid != u.grid:
                raise ValueError("sampled field lives on a different grid")
        elif isinstance(u, (int, float)):
            u = as_expr(u)
        if grid is None:
            raise ValueError("a grid is required for closed-form fields")
        self.u = u
        self.grid = grid
        self.accuracy = accuracy
        self.t = t
        self.analytic = isinstance(u, ClosedForm)
        self._memo: dict[tuple[int, ...], np.ndarray] = {}

    def __call__(self, *axes: int) -> np.ndarray:
        key = tuple(sorted(axes))
        if key not in self._memo:
            if self.analytic:
                self._memo[key] = evaluate_on(self.u.derivative(key), self.grid, self.t)
            else:
                self._memo[key] = fd_partial(self.u.values, self.grid, key, self.accuracy)
        return self._memo[key]

    def gradient(self) -> list[np.ndarray]:
        return [self(a) for a in range(self.grid.dims)]

    def laplacian(self) -> np.ndarray:
        return sum(self(a, a) for a in range(self.grid.dims))


def sample(u: Field, grid: Grid, t: float | None = None) -> np.ndarray:
    if isinstance(u, ScalarField):
        return u.values
    return evaluate_on(as_expr(u), grid, t)


def first_point(mask: np.ndarray, grid: Grid) -> tuple[float, ...] | None:
    """Coordinates of the first grid point where ``mask`` holds, else None."""
    mask = np.broadcast_to(mask, grid.shape)
    if not mask.any():
        return None
    return grid.point(np.unravel_index(int(np.argmax(mask)), grid.shape))
