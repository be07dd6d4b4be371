"""Unit-square grid, boundary measurement curves and traces.

Nodal fields are arrays of shape ``(n, n)`` indexed ``u[i, j]`` with
``x = i*h`` and ``y = j*h``.  Every edge is parameterized by its free
coordinate, increasing from 0 to 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EDGES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class StructuredGrid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 9:
            raise ValueError(f"grid needs n >= 9 nodes per side, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def coords(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    def mesh(self):
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights; they sum to the unit area."""
        w1 = np.full(self.n, self.h)
        w1[[0, -1]] *= 0.5
        return np.outer(w1, w1)

    def edge_weights(self) -> np.ndarray:
        w1 = np.full(self.n, self.h)
        w1[[0, -1]] *= 0.5
        return w1

    def integrate(self, field) -> float:
        return float(np.sum(self.weights * field))

    def mean(self, field) -> float:
        return self.integrate(field)

    def l2_norm(self, field) -> float:
        return float(np.sqrt(np.sum(self.weights * np.asarray(field) ** 2)))

    def edge_values(self, field, edge: str) -> np.ndarray:
        field = np.asarray(field)
        return {
            "bottom": field[:, 0],
            "top": field[:, -1],
            "left": field[0, :],
            "right": field[-1, :],
        }[edge]


def edge_point(edge: str, t):
    """Physical coordinates of edge parameter ``t`` in [0, 1]."""
    t = np.asarray(t, dtype=float)
    zero, one = np.zeros_like(t), np.ones_like(t)
    if edge == "bottom":
        return t, zero
    if edge == "top":
        return t, one
    if edge == "left":
        return zero, t
    if edge == "right":
        return one, t
    raise ValueError(f"unknown edge {edge!r}; expected one of {EDGES}")


@dataclass(frozen=True)
class BoundaryCurve:
    """Straight sub-segment ``[lo, hi]`` of one edge, sampled uniformly.

    Curves touching a corner are rejected.
    """

    edge: str
    lo: float
    hi: float
    samples: int

    def __post_init__(self):
        if self.edge not in EDGES:
            raise ValueError(f"unknown edge {self.edge!r}; expected one of {EDGES}")
        if not 0.0 < self.lo < self.hi < 1.0:
            raise ValueError(f"curve [{self.lo}, {self.hi}] must lie strictly inside the edge")
        if self.samples < 9:
            raise ValueError("a boundary curve needs at least 9 samples")

    @classmethod
    def on_nodes(cls, grid: StructuredGrid, edge="bottom", lo=0.1, hi=0.9) -> "BoundaryCurve":
        """Snap ``[lo, hi]`` to grid nodes so every sample is a node."""
        i0 = int(np.ceil(lo / grid.h - 1e-9))
        i1 = int(np.floor(hi / grid.h + 1e-9))
        return cls(edge, i0 * grid.h, i1 * grid.h, i1 - i0 + 1)

    @property
    def params(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.samples)

    @property
    def positions(self) -> np.ndarray:
        return self.lo + self.params * (self.hi - self.lo)

    @property
    def points(self):
        return edge_point(self.edge, self.positions)

    @property
    def arclength(self) -> float:
        return self.hi - self.lo

    @property
    def spacing(self) -> float:
        return self.arclength / (self.samples - 1)


@dataclass(frozen=True)
class TraceMeasurement:
    """Temperatures on a curve; ``values`` is ``(m,)`` or ``(nt, m)`` with ``times``."""

    curve: BoundaryCurve
    values: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape[-1] != self.curve.samples:
            raise ValueError(
                f"trace has {values.shape[-1]} values but the curve has {self.curve.samples} samples")
        if values.ndim == 2:
            if self.times is None or len(self.times) != values.shape[0]:
                raise ValueError("a time-series trace needs one time stamp per row")
            object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        elif values.ndim != 1:
            raise ValueError("trace values must be 1-D or 2-D")
        object.__setattr__(self, "values", values)

    @property
    def is_series(self) -> bool:
        return self.values.ndim == 2

    def at(self, k: int) -> "TraceMeasurement":
        return TraceMeasurement(self.curve, self.values[k])

    def shifted(self, c: float) -> "TraceMeasurement":
        return TraceMeasurement(self.curve, self.values + c, self.times)


def bilinear(field, x, y):
    """Bilinear interpolation of a nodal field at points ``(x, y)``."""
    field = np.asarray(field, dtype=float)
    n = field.shape[0]
    h = 1.0 / (n - 1)
    fx, fy = np.asarray(x) / h, np.asarray(y) / h
    i = np.clip(np.floor(fx).astype(int), 0, n - 2)
    j = np.clip(np.floor(fy).astype(int), 0, n - 2)
    tx, ty = fx - i, fy - j
    return ((1 - tx) * (1 - ty) * field[i, j] + tx * (1 - ty) * field[i + 1, j]
            + (1 - tx) * ty * field[i, j + 1] + tx * ty * field[i + 1, j + 1])


def trace_extract(field, curve: BoundaryCurve, grid: StructuredGrid | None = None) -> TraceMeasurement:
    field = np.asarray(field, dtype=float)
    if field.ndim != 2 or field.shape[0] != field.shape[1]:
        raise ValueError(f"expected a square nodal field, got shape {field.shape}")
    if grid is not None and field.shape != (grid.n, grid.n):
        raise ValueError(f"field shape {field.shape} does not match grid n={grid.n}")
    x, y = curve.points
    on_boundary = (np.isclose(x, 0) | np.isclose(x, 1) | np.isclose(y, 0) | np.isclose(y, 1))
    if not np.all(on_boundary & (x >= 0) & (x <= 1) & (y >= 0) & (y <= 1)):
        raise ValueError("curve is not on the boundary of the unit square")
    return TraceMeasurement(curve, bilinear(field, x, y))


def tangential_derivative(g: TraceMeasurement) -> np.ndarray:
    """d g / d(arclength): centered inside, one-sided 3-point at the ends."""
    if g.values.shape[-1] < 3:
        raise ValueError("need at least 3 samples")
    return np.gradient(g.values, g.curve.spacing, axis=-1, edge_order=2)


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    min_slope: float
    interval: tuple
    strictly_monotone: bool


def monotonicity_check(g: TraceMeasurement, c_min: float) -> MonotonicityReport:
    d = tangential_derivative(g)
    strict = bool(np.all(d > 0) or np.all(d < 0))
    m = float(np.min(np.abs(d)))
    return MonotonicityReport(
        passed=strict and m >= c_min,
        min_slope=m,
        interval=(float(np.min(g.values)), float(np.max(g.values))),
        strictly_monotone=strict,
    )


def write_trace_csv(trace: TraceMeasurement, path) -> None:
    path = Path(path)
    s = trace.curve.params
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if trace.is_series:
            w.writerow(["t", "s", "g"])
            for t, row in zip(trace.times, trace.values):
                for sk, gk in zip(s, row):
                    w.writerow([repr(float(t)), repr(float(sk)), repr(float(gk))])
        else:
            w.writerow(["s", "g"])
            for sk, gk in zip(s, trace.values):
                w.writerow([repr(float(sk)), repr(float(gk))])


def read_trace_csv(path, curve: BoundaryCurve) -> TraceMeasurement:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader)]
        rows = np.array([[float(v) for v in r] for r in reader if r])
    if header == ["s", "g"]:
        return TraceMeasurement(curve, rows[:, 1])
    if header == ["t", "s", "g"]:
        times, inverse = np.unique(rows[:, 0], return_inverse=True)
        values = np.empty((times.size, curve.samples))
        counts = np.bincount(inverse, minlength=times.size)
        if np.any(counts != curve.samples):
            raise ValueError(f"{path}: every time needs {curve.samples} samples")
        for k in range(times.size):
            block = rows[inverse == k]
            values[k] = block[np.argsort(block[:, 1]), 2]
        return TraceMeasurement(curve, values, times)
    raise ValueError(f"{path}: expected header 's,g' or 't,s,g', got {header}")
