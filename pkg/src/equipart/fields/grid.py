"""Uniform rectilinear grids and sampled scalar/vector fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box.  Periodic axes exclude the upper endpoint."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]
    periodic: tuple[bool, ...] = ()

    def __post_init__(self):
        dims = len(self.n)
        periodic = tuple(self.periodic) or (False,) * dims
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in periodic))
        if not 1 <= dims <= 3:
            raise ValueError(f"grid must have 1 to 3 axes, got {dims}")
        if not (len(self.lo) == len(self.hi) == len(self.periodic) == dims):
            raise ValueError("lo, hi, n and periodic must have the same length")
        for a in range(dims):
            if self.n[a] < 2:
                raise ValueError(f"axis {a} needs at least 2 points")
            if not self.hi[a] > self.lo[a]:
                raise ValueError(f"axis {a}: hi must exceed lo")

    @classmethod
    def cube(cls, dims: int, lo: float, hi: float, n: int, periodic: bool = False) -> "Grid":
        return cls((lo,) * dims, (hi,) * dims, (n,) * dims, (periodic,) * dims)

    @property
    def dims(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(
            (self.hi[a] - self.lo[a]) / (self.n[a] if self.periodic[a] else self.n[a] - 1)
            for a in range(self.dims)
        )

    @property
    def h_max(self) -> float:
        return max(self.h)

    def axis(self, a: int) -> np.ndarray:
        return self.lo[a] + self.h[a] * np.arange(self.n[a])

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        arrays = np.meshgrid(*(self.axis(a) for a in range(self.dims)), indexing="ij")
        for arr in arrays:
            arr.setflags(write=False)
        return tuple(arrays)

    def env(self, t: float | None = None) -> dict[int, np.ndarray | float]:
        """Variable bindings for :meth:`ClosedForm.evaluate`."""
        out: dict[int, np.ndarray | float] = dict(enumerate(self.mesh))
        if t is not None:
            out[3] = float(t)
        return out

    def point(self, index) -> tuple[float, ...]:
        return tuple(float(self.lo[a] + self.h[a] * index[a]) for a in range(self.dims))

    def refine(self, n: int | Sequence[int]) -> "Grid":
        """Same box with a different point count."""
        ns = (n,) * self.dims if isinstance(n, int) else tuple(n)
        return Grid(self.lo, self.hi, ns, self.periodic)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "n": list(self.n), "periodic": list(self.periodic)}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(tuple(d["lo"]), tuple(d["hi"]), tuple(d["n"]), tuple(d.get("periodic", ())))


def _frozen(values, shape) -> np.ndarray:
    arr = np.array(np.broadcast_to(np.asarray(values, dtype=float), shape))
    if not np.all(np.isfinite(arr)):
        bad = np.unravel_index(int(np.argmax(~np.isfinite(arr))), arr.shape)
        raise ValueError(f"non-finite field value at index {tuple(int(i) for i in bad)}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape))


@dataclass(frozen=True)
class VectorField:
    """``values`` has shape ``(m, *grid.shape)`` with ``m`` in {1, 2, 3}."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        m = arr.shape[0] if arr.ndim == self.grid.dims + 1 else -1
        if m not in (1, 2, 3):
            raise ValueError(f"vector field needs shape (m, {self.grid.shape}) with m in 1..3, got {arr.shape}")
        object.__setattr__(self, "values", _frozen(arr, (m, *self.grid.shape)))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    @classmethod
    def stack(cls, comps: Sequence[ScalarField | np.ndarray], grid: Grid | None = None) -> "VectorField":
        if grid is None:
            grid = comps[0].grid
        arrs = [c.values if isinstance(c, ScalarField) else np.asarray(c) for c in comps]
        return cls(grid, np.stack([np.broadcast_to(a, grid.shape) for a in arrs]))
