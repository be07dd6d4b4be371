"""Quasilinear stationary solver: -div(a(u) grad u) = f, a(u) du/dn = j.

With U = A(u) the problem becomes the linear Neumann problem solved in
:mod:`heatid.poisson`; the temperature is u = A^{-1}(U + c) where the
constant c is fixed by a gauge.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import BoundaryCurve, StructuredGrid, TraceMeasurement, bilinear, trace_extract
from .kirchhoff import KirchhoffTransform
from .poisson import FluxData, project_compatible, solve_neumann


@dataclass(frozen=True)
class Gauge:
    """``kind='mean'`` fixes the mean temperature; ``kind='point'`` fixes u(x0, y0)."""

    kind: str = "mean"
    value: float = 0.0
    x0: float = 0.5
    y0: float = 0.5

    def __post_init__(self):
        if self.kind not in ("mean", "point"):
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if not (0.0 <= self.x0 <= 1.0 and 0.0 <= self.y0 <= 1.0):
            raise ValueError("gauge point must lie in the closed unit square")

    @classmethod
    def point(cls, x0, y0, value) -> "Gauge":
        return cls("point", value, x0, y0)

    def functional(self, grid: StructuredGrid, field) -> float:
        if self.kind == "mean":
            return grid.mean(field)
        return float(bilinear(field, self.x0, self.y0))


def _as_transform(law) -> KirchhoffTransform:
    return law if isinstance(law, KirchhoffTransform) else KirchhoffTransform(law)


def fix_constant(grid: StructuredGrid, transform: KirchhoffTransform, U, gauge: Gauge,
                 tol: float = 1e-12, maxiter: int = 200) -> float:
    """Find c with gauge(A^{-1}(U + c)) = gauge.value.

    The map c -> gauge(A^{-1}(U + c)) is increasing, and the root lies in
    [A(value) - max U, A(value) - min U].  Newton steps are kept inside the
    shrinking bracket, falling back to bisection.
    """
    target = transform.principal(gauge.value)
    lo, hi = target - float(np.max(U)), target - float(np.min(U))
    c = target - gauge.functional(grid, U)
    c = min(max(c, lo), hi)
    for _ in range(maxiter):
        u = transform.invert(U + c)
        r = gauge.functional(grid, u) - gauge.value
        if abs(r) <= tol * max(1.0, abs(gauge.value)):
            return c
        if r > 0:
            hi = c
        else:
            lo = c
        dr = gauge.functional(grid, 1.0 / transform.conductivity(u))
        step = c - r / dr if dr > 0 else None
        c = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(c)):
            return c
    return c


def solve_elliptic(grid: StructuredGrid, law, f, j: FluxData, gauge: Gauge = Gauge(),
                   project: bool = True, tol: float = 1e-10) -> np.ndarray:
    """Nodal temperature field for the quasilinear Neumann problem."""
    transform = _as_transform(law)
    if project:
        f, j = project_compatible(grid, f, j)
    U = solve_neumann(grid, f, j, tol=tol)
    c = fix_constant(grid, transform, U, gauge)
    return transform.invert(U + c)


def stationary_trace(grid: StructuredGrid, law, f, j: FluxData, curve: BoundaryCurve,
                     gauge: Gauge = Gauge(), **kwargs) -> TraceMeasurement:
    return trace_extract(solve_elliptic(grid, law, f, j, gauge, **kwargs), curve, grid)


def write_field_csv(grid: StructuredGrid, u, path, name: str = "u") -> None:
    X, Y = grid.mesh()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", name])
        for x, y, v in zip(X.ravel(), Y.ravel(), np.asarray(u).ravel()):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])

