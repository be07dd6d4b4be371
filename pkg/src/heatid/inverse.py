"""Direct identification of a(s) from one boundary temperature trace.

If U solves the transformed Neumann problem for the known data, then
A(g) = U|_gamma + c on the curve for an unknown constant c.  Differentiating
along the curve removes c:

    a(g(s)) = d/ds (U o gamma)(s) / d/ds g(s),

valid wherever the trace is strictly monotone.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from .grid import StructuredGrid, TraceMeasurement, monotonicity_check, tangential_derivative, trace_extract
from .poisson import FluxData, project_compatible, solve_neumann


class EmptyIdentifiableInterval(ValueError):
    """The trace is constant or not monotone, so nothing can be identified."""


@dataclass
class ReconstructionResult:
    v: np.ndarray
    a_hat: np.ndarray
    slope: np.ndarray
    interval: tuple
    min_slope: float
    samples: tuple = ()
    per_time: list = field(default_factory=list)

    def __post_init__(self):
        if self.v.size < 2 or np.any(np.diff(self.v) <= 0):
            raise ValueError("reconstruction grid must be strictly increasing")
        if not np.all(np.isfinite(self.a_hat)):
            raise ValueError("non-finite conductivity estimate")

    def __call__(self, s):
        return np.interp(s, self.v, self.a_hat)

    def diagnostics(self) -> dict:
        return {
            "interval": list(self.interval),
            "min_slope": self.min_slope,
            "points": int(self.v.size),
            "per_time": self.per_time,
        }


def smooth_trace(g: TraceMeasurement, window: int) -> TraceMeasurement:
    """Moving average over ``window`` samples (1 leaves the trace unchanged)."""
    if window <= 1:
        return g
    return TraceMeasurement(g.curve, uniform_filter1d(g.values, window, axis=-1, mode="nearest"), g.times)


def _require_monotone(g: TraceMeasurement, c_min: float) -> None:
    report = monotonicity_check(g, c_min)
    if not report.passed:
        raise EmptyIdentifiableInterval(
            f"trace not strictly monotone with slope >= {c_min:g} "
            f"(min |dg/ds| = {report.min_slope:.3e}, range {report.interval})")


def ratio_estimate(U_trace: TraceMeasurement, g: TraceMeasurement, c_min: float = 1e-6,
                   trim: int = 2) -> ReconstructionResult:
    """Tangential-derivative ratio, resampled on a uniform temperature grid."""
    _require_monotone(g, c_min)
    m = g.curve.samples
    if m - 2 * trim < 2:
        raise EmptyIdentifiableInterval("too few samples left after trimming the curve ends")
    keep = slice(trim, m - trim)
    dU = tangential_derivative(U_trace)[keep]
    dg = tangential_derivative(g)[keep]
    gk = g.values[keep]
    ak = dU / dg
    order = np.argsort(gk)
    gs, as_, ss = gk[order], ak[order], np.abs(dg[order])
    v = np.linspace(gs[0], gs[-1], gs.size)
    return ReconstructionResult(
        v=v,
        a_hat=np.interp(v, gs, as_),
        slope=np.interp(v, gs, ss),
        interval=(float(gs[0]), float(gs[-1])),
        min_slope=float(ss.min()),
        samples=(gk, ak),
    )


def reconstruct_elliptic(grid: StructuredGrid, f, j: FluxData, g: TraceMeasurement,
                         c_min: float = 1e-6, trim: int = 2, smoothing: int = 1,
                         project: bool = False, tol: float = 1e-10) -> ReconstructionResult:
    """Identify a on the range of a stationary trace g.

    The additive constant of the Neumann solution never enters the result.
    """
    if project:
        f, j = project_compatible(grid, f, j)
    g = smooth_trace(g, smoothing)
    # fail on a degenerate trace before paying for the solve
    _require_monotone(g, c_min)
    U = solve_neumann(grid, f, j, tol=tol)
    U_trace = smooth_trace(trace_extract(U, g.curve, grid), smoothing)
    return ratio_estimate(U_trace, g, c_min=c_min, trim=trim)


def recover_principal(result: ReconstructionResult):
    """Cumulative trapezoid of a_hat on the result grid, zero at its left end."""
    v, a = result.v, result.a_hat
    A = np.concatenate(([0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * np.diff(v))))
    return v, A


def merge_results(results: list[ReconstructionResult]) -> ReconstructionResult:
    """Slope-weighted average of estimates on the union of their intervals."""
    lo = min(r.interval[0] for r in results)
    hi = max(r.interval[1] for r in results)
    count = max(r.v.size for r in results)
    v = np.linspace(lo, hi, count)
    num = np.zeros_like(v)
    den = np.zeros_like(v)
    for r in results:
        inside = (v >= r.interval[0]) & (v <= r.interval[1])
        w = np.where(inside, np.interp(v, r.v, r.slope), 0.0)
        num += w * r(v)
        den += w
    covered = den > 0
    v, a_hat, slope = v[covered], num[covered] / den[covered], den[covered]
    return ReconstructionResult(
        v=v, a_hat=a_hat, slope=slope,
        interval=(float(v[0]), float(v[-1])),
        min_slope=min(r.min_slope for r in results),
    )


def reconstruct_parabolic(grid: StructuredGrid, data, trace: TraceMeasurement, times=None,
                          c_min: float = 1e-6, trim: int = 2, smoothing: int = 1,
                          tol: float = 1e-10) -> ReconstructionResult:
    """Quasi-stationary identification from a time series of traces.

    ``data(t)`` returns the instantaneous ``(f, j)``.  Each selected time is
    treated as a stationary experiment; failures are recorded per time and
    only fatal when every time fails.
    """
    if not trace.is_series:
        raise ValueError("reconstruct_parabolic needs a time-series trace")
    if times is None:
        idx = list(range(trace.times.size))
    else:
        idx = []
        for t in np.atleast_1d(times):
            hits = np.flatnonzero(np.isclose(trace.times, t, rtol=0, atol=1e-9 * max(1.0, abs(t))))
            if hits.size == 0:
                raise ValueError(f"no trace recorded at t={t}")
            idx.append(int(hits[0]))
    results, table = [], []
    for k in idx:
        t = float(trace.times[k])
        f, j = project_compatible(grid, *data(t))
        try:
            r = reconstruct_elliptic(grid, f, j, trace.at(k), c_min=c_min, trim=trim,
                                     smoothing=smoothing, tol=tol)
        except EmptyIdentifiableInterval as exc:
            table.append({"t": t, "ok": False, "error": str(exc)})
            continue
        results.append(r)
        table.append({"t": t, "ok": True, "interval": list(r.interval), "min_slope": r.min_slope})
    if not results:
        raise EmptyIdentifiableInterval("no selected time yields a monotone trace")
    merged = merge_results(results)
    merged.per_time = table
    return merged


def error_sup(result: ReconstructionResult, truth) -> float:
    return float(np.max(np.abs(result.a_hat - truth(result.v))))


def write_result(result: ReconstructionResult, path, extra: dict | None = None) -> None:
    """``v,a_hat`` CSV plus a JSON file of diagnostics next to it."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v", "a_hat"])
        for v, a in zip(result.v, result.a_hat):
            w.writerow([repr(float(v)), repr(float(a))])
    diag = result.diagnostics()
    if extra:
        diag.update(extra)
    path.with_suffix(".json").write_text(json.dumps(diag, indent=2) + "\n")
