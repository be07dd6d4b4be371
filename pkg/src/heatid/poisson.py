"""Pure Neumann problem -Lap U = f, dU/dn = j on the unit square.

The 5-point stencil with ghost-node elimination of the flux condition is
assembled in its symmetric (quadrature-weighted) form

    K U = M f + B j,

where M holds the trapezoidal node weights and B the trapezoidal edge
weights.  K annihilates constants, so the system is solvable exactly when
the discrete compatibility residual sum(M f + B j) vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import EDGES, StructuredGrid


class CompatibilityViolation(ValueError):
    """Source and flux violate int f + int j = 0."""


class SolverDivergence(RuntimeError):
    """An iterative solver hit its iteration cap."""


@dataclass(frozen=True)
class FluxData:
    """Boundary flux per edge; each array runs along the edge's coordinate."""

    bottom: np.ndarray
    right: np.ndarray
    top: np.ndarray
    left: np.ndarray

    def __post_init__(self):
        for e in EDGES:
            object.__setattr__(self, e, np.asarray(getattr(self, e), dtype=float))
        if len({getattr(self, e).shape for e in EDGES}) != 1:
            raise ValueError("all edges need the same number of nodes")
        if not all(np.all(np.isfinite(getattr(self, e))) for e in EDGES):
            raise ValueError("flux values must be finite")

    @classmethod
    def zeros(cls, n: int) -> "FluxData":
        return cls(*(np.zeros(n) for _ in EDGES))

    @classmethod
    def uniform(cls, n: int, value: float) -> "FluxData":
        return cls(*(np.full(n, float(value)) for _ in EDGES))

    @classmethod
    def dipole(cls, n: int, amplitude: float = 1.0) -> "FluxData":
        """+amplitude into the left edge, -amplitude on the right edge."""
        z = np.zeros(n)
        return cls(bottom=z, right=np.full(n, -amplitude), top=z, left=np.full(n, amplitude))

    @property
    def n(self) -> int:
        return self.bottom.size

    def edge(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def map(self, fn) -> "FluxData":
        return FluxData(*(fn(getattr(self, e)) for e in EDGES))

    def __add__(self, other: "FluxData") -> "FluxData":
        return FluxData(*(getattr(self, e) + getattr(other, e) for e in EDGES))

    def __sub__(self, other: "FluxData") -> "FluxData":
        return self + other * -1.0

    def __mul__(self, c) -> "FluxData":
        return self.map(lambda v: c * v)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(getattr(self, e)))) for e in EDGES)

    def l2_norm(self, grid: StructuredGrid) -> float:
        w = grid.edge_weights()
        return float(np.sqrt(sum(np.sum(w * getattr(self, e) ** 2) for e in EDGES)))


def boundary_load(grid: StructuredGrid, j: FluxData) -> np.ndarray:
    """Nodal vector B j (trapezoidal edge quadrature)."""
    w = grid.edge_weights()
    out = np.zeros((grid.n, grid.n))
    out[:, 0] += w * j.bottom
    out[:, -1] += w * j.top
    out[0, :] += w * j.left
    out[-1, :] += w * j.right
    return out


def load_vector(grid: StructuredGrid, f, j: FluxData) -> np.ndarray:
    f = np.broadcast_to(np.asarray(f, dtype=float), (grid.n, grid.n))
    return grid.weights * f + boundary_load(grid, j)


def compatibility_residual(grid: StructuredGrid, f, j: FluxData) -> float:
    """Trapezoidal value of int_Omega f dx + int_dOmega j ds."""
    return float(np.sum(load_vector(grid, f, j)))


def project_compatible(grid: StructuredGrid, f, j: FluxData):
    """Shift f by a constant so that (f, j) is exactly compatible."""
    f = np.broadcast_to(np.asarray(f, dtype=float), (grid.n, grid.n))
    return f - compatibility_residual(grid, f, j), j


def _edge_coefficients(n):
    c = np.ones(n)
    c[[0, -1]] = 0.5
    return c


def apply_stiffness(U: np.ndarray) -> np.ndarray:
    """Matrix-free K U; boundary-parallel edges carry half weight."""
    n = U.shape[0]
    c = _edge_coefficients(n)
    out = np.zeros_like(U)
    fx = (U[1:, :] - U[:-1, :]) * c[None, :]
    out[:-1, :] -= fx
    out[1:, :] += fx
    fy = (U[:, 1:] - U[:, :-1]) * c[:, None]
    out[:, :-1] -= fy
    out[:, 1:] += fy
    return out


@lru_cache(maxsize=8)
def stiffness_matrix(n: int) -> sp.csr_matrix:
    """Sparse K in row-major (i*n + j) node ordering."""
    c = _edge_coefficients(n)
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    # x-neighbours (i, j)-(i+1, j) with weight c[j]
    a, b = idx[:-1, :].ravel(), idx[1:, :].ravel()
    wx = np.broadcast_to(c[None, :], (n - 1, n)).ravel()
    # y-neighbours (i, j)-(i, j+1) with weight c[i]
    a2, b2 = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    wy = np.broadcast_to(c[:, None], (n, n - 1)).ravel()
    for p, q, w in ((a, b, wx), (a2, b2, wy)):
        rows += [p, q, p, q]
        cols += [q, p, p, q]
        vals += [-w, -w, w, w]
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n * n, n * n))
    return K.tocsr()


def dirichlet_form(grid: StructuredGrid, w, phi) -> float:
    """Discrete (grad w, grad phi) consistent with the stencil."""
    return float(np.sum(np.asarray(w) * apply_stiffness(np.asarray(phi, dtype=float))))


def cg_mean_zero(b: np.ndarray, tol: float = 1e-10, maxiter: int | None = None):
    """Conjugate gradients for K U = b restricted to sum(U) = 0.

    Returns ``(U, iterations)``.  The constant null vector is projected out
    of the residual every iteration.
    """
    n = b.shape[0]
    maxiter = 20 * n if maxiter is None else maxiter
    b = b - b.mean()
    bnorm = np.linalg.norm(b)
    U = np.zeros_like(b)
    if bnorm == 0.0:
        return U, 0
    r = b.copy()
    p = r.copy()
    rr = float(np.vdot(r, r))
    for it in range(1, maxiter + 1):
        Kp = apply_stiffness(p)
        alpha = rr / float(np.vdot(p, Kp))
        U += alpha * p
        r -= alpha * Kp
        r -= r.mean()
        rr_new = float(np.vdot(r, r))
        if np.sqrt(rr_new) <= tol * bnorm:
            return U - U.mean(), it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise SolverDivergence(
        f"CG did not reach relative residual {tol:g} in {maxiter} iterations "
        f"(got {np.sqrt(rr) / bnorm:.3e})")


def solve_neumann(grid: StructuredGrid, f, j: FluxData, tol: float = 1e-10,
                  tol_compat: float = 1e-10, maxiter: int | None = None) -> np.ndarray:
    """Zero-mean solution of the discrete Neumann problem."""
    if j.n != grid.n:
        raise ValueError(f"flux has {j.n} nodes per edge, grid has {grid.n}")
    f = np.broadcast_to(np.asarray(f, dtype=float), (grid.n, grid.n))
    scale = max(1.0, float(np.max(np.abs(f))), j.max_abs())
    res = compatibility_residual(grid, f, j)
    if abs(res) > tol_compat * scale:
        raise CompatibilityViolation(
            f"int f + int j = {res:.3e} exceeds {tol_compat * scale:.1e}; "
            "project the data first")
    U, _ = cg_mean_zero(load_vector(grid, f, j), tol=tol, maxiter=maxiter)
    return U - grid.mean(U)
