"""Conduction laws a(s) and the Kirchhoff transform A(s) = int_0^s a(r) dr.

Laws are tabulated on a uniform grid and interpolated linearly, so the
principal is piecewise quadratic and is integrated and inverted exactly.
Outside the tabulated range the law is extended by its boundary value.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BUILTIN_RANGE = (-10.0, 10.0)
BUILTIN_SAMPLES = 100_001


@dataclass(frozen=True)
class ConductionLaw:
    """Tabulated admissible conductivity on ``[s_lo, s_hi]``."""

    s_lo: float
    s_hi: float
    values: np.ndarray
    a_lower: float
    a_upper: float
    lipschitz: float
    name: str = "tabulated"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a conduction law needs at least 2 samples")
        if not self.s_hi > self.s_lo:
            raise ValueError("s_hi must exceed s_lo")
        if not np.all(np.isfinite(values)):
            raise ValueError("law values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def ds(self) -> float:
        return (self.s_hi - self.s_lo) / (self.values.size - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.s_lo, self.s_hi, self.values.size)

    def __call__(self, s):
        return np.interp(s, self.nodes, self.values)

    def slope(self, s):
        """Piecewise-constant derivative of the interpolant (0 outside)."""
        s = np.asarray(s, dtype=float)
        d = np.diff(self.values) / self.ds
        k = np.floor((s - self.s_lo) / self.ds).astype(int)
        inside = (s >= self.s_lo) & (s < self.s_hi)
        out = np.where(inside, d[np.clip(k, 0, d.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def scaled(self, kappa: float) -> "ConductionLaw":
        return ConductionLaw(
            self.s_lo, self.s_hi, kappa * self.values,
            kappa * self.a_lower, kappa * self.a_upper, abs(kappa) * self.lipschitz,
            name=f"{kappa}*{self.name}",
        )

    @classmethod
    def from_function(cls, fn, a_lower, a_upper, lipschitz, s_range=BUILTIN_RANGE,
                      samples=BUILTIN_SAMPLES, name="function") -> "ConductionLaw":
        s = np.linspace(s_range[0], s_range[1], samples)
        values = np.broadcast_to(np.asarray(fn(s), dtype=float), s.shape).copy()
        return cls(s_range[0], s_range[1], values, a_lower, a_upper, lipschitz, name=name)

    @classmethod
    def constant(cls, kappa: float, s_range=BUILTIN_RANGE) -> "ConductionLaw":
        return cls(s_range[0], s_range[1], np.array([kappa, kappa], dtype=float),
                   kappa, kappa, 0.0, name=f"const:{kappa:g}")


def builtin_law(spec: str, s_range=BUILTIN_RANGE, samples=BUILTIN_SAMPLES) -> ConductionLaw:
    """Parse ``const:<k>``, ``tanh:<amp>,<rate>`` or ``sin:<amp>,<freq>``.

    ``tanh`` is ``1 + amp*tanh(rate*s)`` and ``sin`` is ``1 + amp*sin(freq*s)``.
    """
    kind, _, args = spec.partition(":")
    try:
        params = [float(p) for p in args.split(",")] if args else []
    except ValueError:
        raise ValueError(f"bad law parameters in {spec!r}") from None
    if kind == "const" and len(params) == 1:
        if params[0] <= 0:
            raise ValueError("constant law must be positive")
        return ConductionLaw.constant(params[0], s_range)
    if kind in ("tanh", "sin") and len(params) == 2:
        amp, rate = params
        if abs(amp) >= 1:
            raise ValueError(f"{spec!r} is not bounded away from zero")
        fn = np.tanh if kind == "tanh" else np.sin
        return ConductionLaw.from_function(
            lambda s: 1.0 + amp * fn(rate * s),
            1.0 - abs(amp), 1.0 + abs(amp), abs(amp * rate),
            s_range=s_range, samples=samples, name=spec,
        )
    raise ValueError(f"unknown builtin law {spec!r}")


def read_law_csv(path, meta_path=None) -> ConductionLaw:
    """Read an ``s,a`` CSV; bounds come from a sidecar JSON when present.

    Without metadata the bounds are taken from the samples themselves.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["s", "a"]:
            raise ValueError(f"{path}: expected header 's,a'")
        rows = [(float(r["s"]), float(r["a"])) for r in reader]
    s, a = np.array(rows).T
    ds = np.diff(s)
    if np.any(ds <= 0):
        raise ValueError(f"{path}: s must be strictly increasing")
    if not np.allclose(ds, ds[0], rtol=1e-9, atol=0):
        raise ValueError(f"{path}: s must be uniformly spaced")
    meta_path = Path(meta_path) if meta_path else path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ConductionLaw(
        s[0], s[-1], a,
        float(meta.get("a_lower", a.min())),
        float(meta.get("a_upper", a.max())),
        float(meta.get("lipschitz", np.abs(np.diff(a) / ds).max())),
        name=path.name,
    )


def write_law_csv(law: ConductionLaw, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "a"])
        for s, a in zip(law.nodes, law.values):
            w.writerow([repr(float(s)), repr(float(a))])
    meta = {"a_lower": law.a_lower, "a_upper": law.a_upper, "lipschitz": law.lipschitz}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


@dataclass(frozen=True)
class AdmissibilityReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_admissible(law: ConductionLaw) -> AdmissibilityReport:
    """List every violated bound as ``(kind, index)`` pairs."""
    out = []
    if not law.a_lower > 0:
        out.append(("lower bound", -1))
    for i in np.flatnonzero((law.values < law.a_lower) | (law.values <= 0)):
        out.append(("lower bound", int(i)))
    for i in np.flatnonzero(law.values > law.a_upper):
        out.append(("upper bound", int(i)))
    slopes = np.abs(np.diff(law.values)) / law.ds
    # relative slack absorbs rounding in the tabulated differences
    tol = law.lipschitz * (1 + 1e-9) + 1e-12
    for i in np.flatnonzero(slopes > tol):
        out.append(("Lipschitz", int(i)))
    return AdmissibilityReport(out)


class KirchhoffTransform:
    """Exact principal and inverse for a piecewise-linear law."""

    def __init__(self, law: ConductionLaw):
        self.law = law
        v = law.values
        seg = 0.5 * (v[:-1] + v[1:]) * law.ds
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        # shift so that A(0) = 0
        self._cum = cum - self._raw(0.0, cum)
        self._cum.setflags(write=False)

    def _raw(self, s, cum):
        law = self.law
        v, x0, ds = law.values, law.s_lo, law.ds
        s = np.asarray(s, dtype=float)
        below = s < law.s_lo
        above = s > law.s_hi
        k = np.clip(np.floor((s - x0) / ds).astype(int), 0, v.size - 2)
        r = np.clip(s - (x0 + k * ds), 0.0, ds)
        slope = (v[k + 1] - v[k]) / ds
        inner = cum[k] + v[k] * r + 0.5 * slope * r * r
        out = np.where(below, cum[0] + v[0] * (s - law.s_lo), inner)
        out = np.where(above, cum[-1] + v[-1] * (s - law.s_hi), out)
        return out

    def principal(self, s):
        out = self._raw(s, self._cum)
        return out if out.ndim else float(out)

    __call__ = principal

    def invert(self, U, newton_polish: bool = True):
        """Return s with A(s) = U.

        The bracketing segment is found by bisection over the cumulative
        breakpoints; inside it the quadratic is solved in closed form and
        polished by one Newton step.
        """
        law, cum = self.law, self._cum
        v, ds = law.values, law.ds
        U = np.asarray(U, dtype=float)
        k = np.clip(np.searchsorted(cum, U, side="right") - 1, 0, v.size - 2)
        rhs = U - cum[k]
        slope = (v[k + 1] - v[k]) / ds
        # 0.5*slope*r^2 + v_k*r - rhs = 0, stable root
        disc = np.maximum(v[k] ** 2 + 2.0 * slope * rhs, 0.0)
        r = 2.0 * rhs / (v[k] + np.sqrt(disc))
        s = law.s_lo + k * ds + r
        s = np.where(U < cum[0], law.s_lo + (U - cum[0]) / v[0], s)
        s = np.where(U > cum[-1], law.s_hi + (U - cum[-1]) / v[-1], s)
        if newton_polish:
            s = s - (self._raw(s, cum) - U) / law(s)
        return s if s.ndim else float(s)

    def conductivity(self, s):
        return self.law(s)
