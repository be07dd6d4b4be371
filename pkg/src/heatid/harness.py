"""Experiment design, stability studies and convergence studies.

The reference experiment is a dipole flux (heat enters through the left
edge and leaves through the right one) with no source, measured on a
segment of the bottom edge.  It satisfies the compatibility condition by
antisymmetry and gives a monotone boundary trace.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .elliptic import Gauge, solve_elliptic, stationary_trace
from .grid import BoundaryCurve, StructuredGrid, TraceMeasurement, monotonicity_check, trace_extract
from .inverse import (EmptyIdentifiableInterval, ReconstructionResult, error_sup,
                      reconstruct_elliptic, reconstruct_parabolic)
from .kirchhoff import ConductionLaw, KirchhoffTransform
from .parabolic import Ramp, Schedule, max_ut_norm, simulate, step
from .poisson import FluxData, project_compatible, solve_neumann


class DesignInfeasible(RuntimeError):
    pass


class EquilibriumNotReached(RuntimeError):
    pass


@dataclass(frozen=True)
class Experiment:
    """Grid, measurement curve and dipole amplitude of a stationary experiment."""

    n: int = 65
    edge: str = "bottom"
    curve_lo: float = 0.1
    curve_hi: float = 0.9
    amplitude: float = 1.0

    @property
    def grid(self) -> StructuredGrid:
        return StructuredGrid(self.n)

    @property
    def curve(self) -> BoundaryCurve:
        return BoundaryCurve.on_nodes(self.grid, self.edge, self.curve_lo, self.curve_hi)

    @property
    def flux(self) -> FluxData:
        return FluxData.dipole(self.n, self.amplitude)

    @property
    def source(self) -> np.ndarray:
        return np.zeros((self.n, self.n))

    def trace(self, law, flux=None, source=None) -> TraceMeasurement:
        f, j = project_compatible(self.grid, self.source if source is None else source,
                                  self.flux if flux is None else flux)
        return stationary_trace(self.grid, law, f, j, self.curve)

    def reconstruct(self, g: TraceMeasurement, **kwargs) -> ReconstructionResult:
        return reconstruct_elliptic(self.grid, self.source, self.flux, g, **kwargs)


@dataclass(frozen=True)
class ExperimentDesign:
    """Ramped dipole experiment; JSON round-trippable.

    The flux is ``amplitude * rho(t) * dipole`` with a smooth ramp over
    ``[0, t_ramp]`` followed by a hold of length ``t_hold``.  All steps use
    ``dt = t_ramp / ramp_steps``; the hold phase is the measurement window.
    """

    g1: float
    g2: float
    eps: float
    amplitude: float
    t_ramp: float
    n: int = 65
    edge: str = "bottom"
    curve_lo: float = 0.1
    curve_hi: float = 0.9
    ramp_steps: int = 32
    hold_steps: int = 16
    c1: float = 1.0
    c_min: float = 1e-6
    max_ut: float | None = None

    @property
    def dt(self) -> float:
        return self.t_ramp / self.ramp_steps

    @property
    def t_hold(self) -> float:
        return self.hold_steps * self.dt

    @property
    def T(self) -> float:
        return (self.ramp_steps + self.hold_steps) * self.dt

    @property
    def window(self) -> tuple:
        return self.t_ramp, self.T

    @property
    def ut_budget(self) -> float:
        return self.c1 * self.eps ** 2

    @property
    def experiment(self) -> Experiment:
        return Experiment(self.n, self.edge, self.curve_lo, self.curve_hi, self.amplitude)

    def schedule(self) -> Schedule:
        return Schedule(self.T, self.dt, self.experiment.flux, 0.0, Ramp("smooth", self.t_ramp))

    def hold_times(self) -> np.ndarray:
        return self.schedule().times[self.ramp_steps:]

    def with_ramp(self, t_ramp: float) -> "ExperimentDesign":
        return replace(self, t_ramp=float(t_ramp), max_ut=None)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentDesign":
        return cls(**json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ExperimentDesign":
        return cls.from_json(Path(path).read_text())


def validation_run(design: ExperimentDesign, law) -> float:
    """Max over all steps of the discrete L2 norm of u_t."""
    traj = simulate(StructuredGrid(design.n), law, design.schedule())
    return max_ut_norm(traj)


def design_ramp(law_bounds, g1: float, g2: float, eps: float, n: int = 65, c1: float = 1.0,
                c_min: float = 1e-6, margin: float = 1.25, edge: str = "bottom",
                curve_lo: float = 0.1, curve_hi: float = 0.9, ramp_steps: int = 32,
                hold_steps: int = 16, max_iter: int = 8) -> ExperimentDesign:
    """Pick a flux amplitude covering [g1, g2] and a ramp slow enough for the u_t budget.

    Both choices are validated with the mid-range constant law
    ``(a_lower + a_upper) / 2``: a stationary solve for the temperature
    range, then simulations that lengthen the ramp until
    ``max ||u_t|| <= c1 * eps**2``.
    """
    if not g1 < g2:
        raise ValueError("need g1 < g2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    a_lo, a_hi = law_bounds
    kappa = 0.5 * (a_lo + a_hi)
    mid = ConductionLaw.constant(kappa)
    base = Experiment(n, edge, curve_lo, curve_hi, 1.0)
    # mass is conserved from u0 = 0, so the equilibrium has zero mean
    g = base.trace(mid).values[2:-2]
    lo, hi = float(g.min()), float(g.max())
    need = []
    if g2 > 0:
        need.append(g2 / hi if hi > 0 else math.inf)
    if g1 < 0:
        need.append(g1 / lo if lo < 0 else math.inf)
    amp = margin * max(need, default=1.0)
    if not math.isfinite(amp) or amp <= 0:
        raise DesignInfeasible(f"the dipole trace cannot reach [{g1}, {g2}]")

    exp = replace(base, amplitude=amp)
    trial = exp.trace(mid)
    report = monotonicity_check(trial, c_min)
    if not report.passed or report.interval[0] > g1 or report.interval[1] < g2:
        raise DesignInfeasible(f"trial trace {report} does not cover [{g1}, {g2}]")

    # max rate of the smooth ramp is pi / (2 t_ramp)
    u_stat = solve_elliptic(exp.grid, mid, exp.source, exp.flux)
    budget = c1 * eps ** 2
    t_ramp = 0.5 * math.pi * exp.grid.l2_norm(u_stat) / budget
    design = ExperimentDesign(g1, g2, eps, amp, t_ramp, n, edge, curve_lo, curve_hi,
                              ramp_steps, hold_steps, c1, c_min)
    for _ in range(max_iter):
        measured = validation_run(design, mid)
        if measured <= budget:
            return replace(design, max_ut=measured)
        design = design.with_ramp(design.t_ramp * 1.05 * measured / budget)
    raise DesignInfeasible(f"u_t budget {budget:g} not met after {max_iter} ramp extensions")


def ramp_experiment(truth, design: ExperimentDesign, times=None):
    """Simulate a design with the true law and reconstruct over the hold window.

    Returns ``(result, max_ut)``.
    """
    exp = design.experiment
    sched = design.schedule()
    traj = simulate(exp.grid, truth, sched, exp.curve)
    times = design.hold_times() if times is None else times
    result = reconstruct_parabolic(exp.grid, sched.data, traj.trace, times, c_min=design.c_min)
    return result, max_ut_norm(traj)


def equilibrium_mode(truth, design: ExperimentDesign, dt: float = 0.1, tol: float = 1e-8,
                     max_steps: int = 2000) -> ReconstructionResult:
    """Hold the full flux from t = 0+, wait for equilibrium, reconstruct once."""
    exp = design.experiment
    grid = exp.grid
    transform = KirchhoffTransform(truth) if isinstance(truth, ConductionLaw) else truth
    f, j = exp.source, exp.flux
    u = np.zeros((grid.n, grid.n))
    for _ in range(max_steps):
        u_new = step(grid, transform, u, f, j, dt)
        rate = grid.l2_norm((u_new - u) / dt)
        u = u_new
        if rate <= tol:
            break
    else:
        raise EquilibriumNotReached(f"||u_t|| still {rate:.3e} after {max_steps} steps")
    return exp.reconstruct(trace_extract(u, exp.curve, grid), c_min=design.c_min)


def result_distance(r1: ReconstructionResult, r2: ReconstructionResult) -> float:
    """Sup distance of two estimates on the overlap of their grids."""
    lo = max(r1.v[0], r2.v[0])
    hi = min(r1.v[-1], r2.v[-1])
    if not lo < hi:
        raise ValueError("estimates do not overlap")
    v = np.concatenate([r.v[(r.v >= lo) & (r.v <= hi)] for r in (r1, r2)])
    return float(np.max(np.abs(r1(v) - r2(v))))


# ----- perturbations ---------------------------------------------------------

BUMP_HALF_WIDTH = 0.2


def bump(x, center: float, half_width: float = BUMP_HALF_WIDTH):
    """(1 + cos(pi (x - center) / w)) / 2 on |x - center| < w, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    r = (x - center) / half_width
    return np.where(np.abs(r) < 1.0, 0.5 * (1.0 + np.cos(np.pi * r)), 0.0)


def bump_l2(half_width: float = BUMP_HALF_WIDTH) -> float:
    return math.sqrt(0.75 * half_width)


def bump_w1inf(half_width: float = BUMP_HALF_WIDTH) -> float:
    return 1.0 + 0.5 * math.pi / half_width


def perturbed_trace(exp: Experiment, truth, mode: str, delta: float) -> TraceMeasurement:
    """Trace of the true law under data perturbed by a bump of size delta.

    ``flux``: bump on the measured edge with L2 norm delta.
    ``source``: product bump in the lower half with L2 norm delta.
    ``measurement``: bump added to the trace with W^{1,inf} norm delta.
    Perturbed data are re-projected to compatibility.
    """
    grid, curve = exp.grid, exp.curve
    center = 0.5 * (exp.curve_lo + exp.curve_hi)
    if mode == "measurement":
        g = exp.trace(truth)
        return TraceMeasurement(curve, g.values + delta / bump_w1inf() * bump(curve.positions, center))
    if mode == "flux":
        db = delta / bump_l2() * bump(grid.coords, center)
        j = exp.flux
        fields = {e: j.edge(e) for e in ("bottom", "right", "top", "left")}
        fields[exp.edge] = fields[exp.edge] + db
        return exp.trace(truth, flux=FluxData(**fields))
    if mode == "source":
        X, Y = grid.mesh()
        df = delta / bump_l2() ** 2 * bump(X, center) * bump(Y, 0.3)
        return exp.trace(truth, source=exp.source + df)
    raise ValueError(f"unknown perturbation mode {mode!r}")


def _stability_point(args):
    exp, truth, mode, delta = args
    g = perturbed_trace(exp, truth, mode, delta)
    return error_sup(exp.reconstruct(g), truth)


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def stability_study(truth, deltas, mode: str = "flux", experiment: Experiment = Experiment(),
                    jobs: int = 1) -> dict:
    """Reconstruction error under perturbed data for each delta.

    Returns a dict with the table rows ``(delta, error)`` and the fitted
    log-log slope over the positive deltas.
    """
    deltas = [float(d) for d in deltas]
    if any(d < 0 for d in deltas):
        raise ValueError("perturbation levels must be nonnegative")
    errors = _map(_stability_point, [(experiment, truth, mode, d) for d in deltas], jobs)
    return {
        "mode": mode,
        "rows": list(zip(deltas, errors)),
        "slope": loglog_slope(deltas, errors) if sum(d > 0 for d in deltas) >= 2 else None,
    }


# ----- convergence -----------------------------------------------------------

def observed_orders(h, err) -> list:
    h, err = np.asarray(h, float), np.asarray(err, float)
    return [float(np.log(err[i] / err[i + 1]) / np.log(h[i] / h[i + 1])) for i in range(h.size - 1)]


def manufactured_errors(truth, n: int):
    """Poisson and quasilinear errors for U* = cos(pi x) cos(pi y) on an n-grid."""
    grid = StructuredGrid(n)
    X, Y = grid.mesh()
    U_star = np.cos(np.pi * X) * np.cos(np.pi * Y)
    f = 2 * np.pi ** 2 * U_star
    j = FluxData.zeros(n)
    f, j = project_compatible(grid, f, j)
    U = solve_neumann(grid, f, j)
    poisson_err = float(np.max(np.abs(U - (U_star - grid.mean(U_star)))))
    transform = KirchhoffTransform(truth)
    u_star = transform.invert(U_star)
    gauge = Gauge.point(0.5, 0.5, float(u_star[n // 2, n // 2]))
    u = solve_elliptic(grid, transform, f, j, gauge)
    return poisson_err, float(np.max(np.abs(u - u_star)))


def _convergence_point(args):
    truth, n, experiment = args
    poisson_err, forward_err = manufactured_errors(truth, n)
    exp = replace(experiment, n=n)
    recon_err = error_sup(exp.reconstruct(exp.trace(truth)), truth)
    return n, 1.0 / (n - 1), poisson_err, forward_err, recon_err


def convergence_study(truth, sizes, experiment: Experiment = Experiment(), jobs: int = 1) -> dict:
    sizes = [int(n) for n in sizes]
    if len(sizes) < 3:
        raise ValueError("a convergence study needs at least 3 grid sizes")
    if len(set(sizes)) != len(sizes):
        raise ValueError("grid sizes must be distinct")
    rows = _map(_convergence_point, [(truth, n, experiment) for n in sizes], jobs)
    h = [r[1] for r in rows]
    return {
        "rows": rows,
        "poisson_orders": observed_orders(h, [r[2] for r in rows]),
        "forward_orders": observed_orders(h, [r[3] for r in rows]),
        "reconstruction_orders": observed_orders(h, [r[4] for r in rows]),
    }

