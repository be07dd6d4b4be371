"""Quasilinear heat equation u_t - div(a(u) grad u) = f with flux a(u) du/dn = j.

Implicit Euler in time.  Each step solves

    M (u - u_prev) / dt + K A(u) = M f + B j

for the transformed unknown U = A(u) by damped Newton; the Jacobian
M diag(1 / a(u)) / dt + K is symmetric positive definite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import BoundaryCurve, StructuredGrid, TraceMeasurement, bilinear
from .kirchhoff import KirchhoffTransform
from .poisson import FluxData, apply_stiffness, load_vector, stiffness_matrix


class NewtonDivergence(RuntimeError):
    """Newton failed to reduce the residual; try a smaller time step."""


@dataclass(frozen=True)
class Ramp:
    """Time profile rho(t) with rho(0) = 0.

    ``smooth`` rises as (1 - cos(pi t / duration)) / 2 and then holds at 1,
    ``linear`` rises as t / duration, ``step`` is 1 for every t > 0.
    """

    kind: str = "smooth"
    duration: float = 1.0

    def __post_init__(self):
        if self.kind not in ("smooth", "linear", "step", "zero"):
            raise ValueError(f"unknown ramp kind {self.kind!r}")
        if self.kind in ("smooth", "linear") and not self.duration > 0:
            raise ValueError("ramp duration must be positive")

    def __call__(self, t: float) -> float:
        if t <= 0 or self.kind == "zero":
            return 0.0
        if self.kind == "step" or t >= self.duration:
            return 1.0
        if self.kind == "linear":
            return t / self.duration
        return 0.5 * (1.0 - math.cos(math.pi * t / self.duration))

    def rate(self, t: float) -> float:
        if self.kind in ("step", "zero") or t <= 0 or t >= self.duration:
            return 0.0
        if self.kind == "linear":
            return 1.0 / self.duration
        return 0.5 * math.pi / self.duration * math.sin(math.pi * t / self.duration)


@dataclass(frozen=True)
class Schedule:
    """Data rho(t) * (source pattern, flux pattern) on [0, T] with step dt."""

    T: float
    dt: float
    flux: FluxData
    source: np.ndarray | float = 0.0
    ramp: Ramp = field(default_factory=Ramp)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.ramp(0.0) != 0.0:
            raise ValueError("data must vanish at t = 0")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def data(self, t: float):
        r = self.ramp(t)
        return r * np.asarray(self.source, dtype=float), r * self.flux


@dataclass
class StepStats:
    iterations: int
    residual: float


def _residual(grid, transform, U, u_prev, load, dt):
    u = transform.invert(U)
    return u, grid.weights * (u - u_prev) / dt + apply_stiffness(U) - load


def step(grid: StructuredGrid, law, u_prev, f_next, j_next: FluxData, dt: float,
         tol: float = 1e-10, maxiter: int = 50, max_halvings: int = 8,
         stats: list | None = None) -> np.ndarray:
    """One implicit-Euler step; returns the new temperature field."""
    transform = law if isinstance(law, KirchhoffTransform) else KirchhoffTransform(law)
    u_prev = np.asarray(u_prev, dtype=float)
    load = load_vector(grid, f_next, j_next)
    W = grid.weights
    scale = 1.0 + np.max(np.abs(u_prev)) / dt + np.max(np.abs(load / W))
    K = stiffness_matrix(grid.n)

    U = transform.principal(u_prev)
    u, R = _residual(grid, transform, U, u_prev, load, dt)
    rnorm = np.max(np.abs(R / W))
    for it in range(1, maxiter + 1):
        diag = (W / (transform.conductivity(u) * dt)).ravel()
        J = (K + sp.diags(diag)).tocsc()
        delta = -splu(J).solve(R.ravel()).reshape(U.shape)
        lam = 1.0
        for _ in range(max_halvings + 1):
            u_try, R_try = _residual(grid, transform, U + lam * delta, u_prev, load, dt)
            r_try = np.max(np.abs(R_try / W))
            if r_try < rnorm or r_try <= tol * scale:
                break
            lam *= 0.5
        else:
            raise NewtonDivergence(
                f"residual {rnorm:.3e} not reduced after {max_halvings} halvings (dt={dt:g})")
        U, u, R, rnorm = U + lam * delta, u_try, R_try, r_try
        if rnorm <= tol * scale:
            if stats is not None:
                stats.append(StepStats(it, rnorm / scale))
            return u
    raise NewtonDivergence(f"no convergence in {maxiter} Newton iterations (dt={dt:g})")


@dataclass
class Trajectory:
    grid: StructuredGrid
    times: np.ndarray
    fields: np.ndarray
    trace: TraceMeasurement | None = None

    @property
    def steps(self) -> int:
        return len(self.times) - 1


def simulate(grid: StructuredGrid, law, schedule: Schedule, curve: BoundaryCurve | None = None,
             u0=None, tol: float = 1e-10) -> Trajectory:
    """March from u0 (zero by default) through every step of the schedule."""
    transform = law if isinstance(law, KirchhoffTransform) else KirchhoffTransform(law)
    times = schedule.times
    fields = np.empty((times.size, grid.n, grid.n))
    fields[0] = 0.0 if u0 is None else u0
    for k in range(1, times.size):
        f, j = schedule.data(times[k])
        fields[k] = step(grid, transform, fields[k - 1], f, j, times[k] - times[k - 1], tol=tol)
    trace = None
    if curve is not None:
        x, y = curve.points
        values = np.array([bilinear(u, x, y) for u in fields])
        trace = TraceMeasurement(curve, values, times)
    return Trajectory(grid, times, fields, trace)


def ut_norm(traj: Trajectory, k: int) -> float:
    """Discrete L2 norm of (u^k - u^{k-1}) / dt_k."""
    if not 1 <= k <= traj.steps:
        raise IndexError(f"step index {k} outside 1..{traj.steps}")
    dt = traj.times[k] - traj.times[k - 1]
    return traj.grid.l2_norm((traj.fields[k] - traj.fields[k - 1]) / dt)


def max_ut_norm(traj: Trajectory) -> float:
    return max(ut_norm(traj, k) for k in range(1, traj.steps + 1))


def energy_terms(grid: StructuredGrid, law_a, law_b, traj_a: Trajectory, traj_b: Trajectory, k: int):
    """Return ``((u_t - v_t, phi)_h, (grad phi, grad phi)_h)`` at step k.

    phi = A(u) - B(v).  For identical data the scheme gives
    (u_t - v_t, phi)_h = -(grad phi, grad phi)_h up to solver tolerance.
    """
    ta = law_a if isinstance(law_a, KirchhoffTransform) else KirchhoffTransform(law_a)
    tb = law_b if isinstance(law_b, KirchhoffTransform) else KirchhoffTransform(law_b)
    dt = traj_a.times[k] - traj_a.times[k - 1]
    du = (traj_a.fields[k] - traj_a.fields[k - 1]) / dt
    dv = (traj_b.fields[k] - traj_b.fields[k - 1]) / dt
    phi = ta.principal(traj_a.fields[k]) - tb.principal(traj_b.fields[k])
    lhs = float(np.sum(grid.weights * (du - dv) * phi))
    dirichlet = float(np.sum(phi * apply_stiffness(phi)))
    return lhs, dirichlet
