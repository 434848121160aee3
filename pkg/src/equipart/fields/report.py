"""Residual norms and convergence-order estimation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grid import Grid

ANALYTIC_TOL = 1e-10
SATURATION_FLOOR = 1e-14


class SaturatedResidualError(ValueError):
    """A residual sits at the rounding floor, so no slope can be fitted."""


@dataclass(frozen=True)
class ResidualReport:
    """Named residual norms.  ``l2`` is the root-mean-square over the points."""

    name: str
    linf: float
    l2: float
    grid_h: float
    order_estimate: float | str | None = None
    parts: tuple["ResidualReport", ...] = field(default=())
    note: str = ""

    @classmethod
    def of(cls, name: str, residual, grid: Grid | None = None, *, grid_h: float | None = None, note: str = ""):
        r = np.abs(np.asarray(residual, dtype=float))
        if r.size == 0:
            raise ValueError("empty residual")
        if not np.all(np.isfinite(r)):
            linf = l2 = float("inf")
        else:
            linf = float(r.max())
            l2 = float(np.sqrt(np.mean(r * r)))
            l2 = min(l2, linf)
        h = grid.h_max if grid is not None else (grid_h if grid_h is not None else 0.0)
        return cls(name, linf, l2, float(h), note=note)

    @classmethod
    def combine(cls, name: str, parts: Sequence["ResidualReport"], note: str = "") -> "ResidualReport":
        """Max over parts (l2 is the max of the parts' l2 values)."""
        return cls(
            name,
            max(p.linf for p in parts),
            max(p.l2 for p in parts),
            max(p.grid_h for p in parts),
            parts=tuple(parts),
            note=note,
        )

    def passed(self, tol: float = ANALYTIC_TOL) -> bool:
        return bool(self.linf <= tol)

    def with_order(self, order: float | str | None) -> "ResidualReport":
        return ResidualReport(self.name, self.linf, self.l2, self.grid_h, order, self.parts, self.note)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "linf": self.linf,
            "l2": self.l2,
            "grid_h": self.grid_h,
            "order_estimate": self.order_estimate,
        }
        if self.parts:
            d["parts"] = [p.to_dict() for p in self.parts]
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualReport":
        return cls(
            d["name"],
            float(d["linf"]),
            float(d["l2"]),
            float(d["grid_h"]),
            d.get("order_estimate"),
            tuple(cls.from_dict(p) for p in d.get("parts", ())),
            d.get("note", ""),
        )


def convergence_order(levels: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of log(residual) against log(h).

    Raises ``SaturatedResidualError`` when any residual is at or below the
    rounding floor; callers report that as "saturated".
    """
    pts = [(float(h), float(v)) for h, v in levels]
    if len(pts) < 3:
        raise ValueError("need at least 3 grid levels")
    hs = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    if np.any(np.diff(hs) >= 0):
        raise ValueError("h must be strictly decreasing")
    if np.any(vs <= SATURATION_FLOOR):
        raise SaturatedResidualError("residual at machine floor")
    slope, _ = np.polyfit(np.log(hs), np.log(vs), 1)
    return float(slope)
