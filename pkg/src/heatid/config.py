"""Run configuration: TOML-style files plus ``section.key=value`` overrides."""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("forward-elliptic", "forward-parabolic", "reconstruct", "reconstruct-parabolic",
            "design", "stability", "convergence", "equilibrium")


class ParseError(ValueError):
    """Malformed config text or unknown key."""


class ValidationError(ValueError):
    """Well-formed config with invalid values."""


@dataclass
class CurveSection:
    edge: str = "bottom"
    lo: float = 0.1
    hi: float = 0.9


@dataclass
class ExperimentSection:
    amplitude: float = 1.0


@dataclass
class ScheduleSection:
    ramp: str = "smooth"
    t_ramp: float = 1.0
    ramp_steps: int = 32
    hold_steps: int = 16
    snapshot_stride: int = 0


@dataclass
class DesignSection:
    file: str = ""
    g1: float = 0.2
    g2: float = 0.8
    eps: float = 0.5
    c1: float = 1.0
    margin: float = 1.25


@dataclass
class ReconstructSection:
    trace: str = ""
    c_min: float = 1e-6
    trim: int = 2
    smoothing: int = 1


@dataclass
class StabilitySection:
    mode: str = "flux"
    deltas: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])


@dataclass
class ConvergenceSection:
    sizes: list = field(default_factory=lambda: [33, 65, 129])


@dataclass
class Tolerances:
    linear: float = 1e-10
    newton: float = 1e-10
    equilibrium: float = 1e-8
    equilibrium_dt: float = 0.1


@dataclass
class RunConfig:
    command: str = "forward-elliptic"
    n: int = 65
    law: str = "const:1"
    law_meta: str = ""
    truth: str = ""
    output: str = "heatid-out"
    jobs: int = 1
    curve: CurveSection = field(default_factory=CurveSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    design: DesignSection = field(default_factory=DesignSection)
    reconstruct: ReconstructSection = field(default_factory=ReconstructSection)
    stability: StabilitySection = field(default_factory=StabilitySection)
    convergence: ConvergenceSection = field(default_factory=ConvergenceSection)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(value, default, key):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ParseError(f"key {key!r}: expected {type(default).__name__}, got {value!r}")
    return value


def _fill(obj, data: dict, prefix: str = ""):
    known = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        dotted = prefix + key
        if key not in known:
            raise ParseError(f"unknown key {dotted!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ParseError(f"key {dotted!r} must be a section")
            _fill(current, value, dotted + ".")
        else:
            setattr(obj, key, _coerce(value, current, dotted))
    return obj


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: RunConfig, assignment: str) -> None:
    """Apply ``section.key=value``; the value is read as a TOML literal when possible."""
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ParseError(f"override {assignment!r} is not of the form key=value")
    nested: dict = {}
    node = nested
    parts = key.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = _parse_value(raw.strip())
    _fill(cfg, nested)


def validate(cfg: RunConfig) -> RunConfig:
    errors = []
    if cfg.command not in COMMANDS:
        errors.append(f"command must be one of {COMMANDS}")
    if cfg.n < 9:
        errors.append("n must be at least 9")
    if cfg.jobs < 1:
        errors.append("jobs must be at least 1")
    if cfg.curve.edge not in ("bottom", "right", "top", "left"):
        errors.append(f"curve.edge {cfg.curve.edge!r} is not an edge")
    if not 0.0 < cfg.curve.lo < cfg.curve.hi < 1.0:
        errors.append("curve must satisfy 0 < lo < hi < 1")
    s = cfg.schedule
    if s.ramp not in ("smooth", "linear", "step"):
        errors.append(f"schedule.ramp {s.ramp!r} unknown")
    if s.t_ramp <= 0:
        errors.append("schedule.t_ramp must be positive")
    if s.ramp_steps < 1 or s.hold_steps < 0 or s.snapshot_stride < 0:
        errors.append("schedule step counts must be nonnegative (ramp_steps >= 1)")
    d = cfg.design
    if not d.g1 < d.g2:
        errors.append("design.g1 must be below design.g2")
    if d.eps <= 0 or d.c1 <= 0 or d.margin <= 0:
        errors.append("design.eps, design.c1 and design.margin must be positive")
    r = cfg.reconstruct
    if r.c_min <= 0 or r.trim < 1 or r.smoothing < 1:
        errors.append("reconstruct.c_min must be positive, trim and smoothing >= 1")
    if cfg.stability.mode not in ("flux", "source", "measurement"):
        errors.append(f"stability.mode {cfg.stability.mode!r} unknown")
    if not cfg.stability.deltas or any(not isinstance(x, (int, float)) or x < 0
                                       for x in cfg.stability.deltas):
        errors.append("stability.deltas must be nonnegative numbers")
    if len(cfg.convergence.sizes) < 3 or any(not isinstance(x, int) or x < 9
                                             for x in cfg.convergence.sizes):
        errors.append("convergence.sizes needs at least 3 integers >= 9")
    for name, value in dataclasses.asdict(cfg.tolerances).items():
        if value <= 0:
            errors.append(f"tolerances.{name} must be positive")
    for path_key in ("law_meta",):
        p = getattr(cfg, path_key)
        if p and not Path(p).exists():
            errors.append(f"{path_key} file {p!r} does not exist")
    for label, p in (("reconstruct.trace", r.trace), ("design.file", d.file)):
        if p and not Path(p).exists():
            errors.append(f"{label} file {p!r} does not exist")
    for label, spec in (("law", cfg.law), ("truth", cfg.truth)):
        if spec and ":" not in spec and not Path(spec).exists():
            errors.append(f"{label} {spec!r} is neither a builtin law nor an existing file")
    if errors:
        raise ValidationError("; ".join(errors))
    return cfg


def parse_config(path=None, overrides=(), **flags) -> RunConfig:
    """Read an optional TOML file, apply overrides and flags, validate."""
    cfg = RunConfig()
    if path is not None:
        text = Path(path).read_text()
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
        _fill(cfg, data)
    for item in overrides:
        apply_override(cfg, item)
    for key, value in flags.items():
        if value is not None:
            _fill(cfg, {key: value})
    return validate(cfg)


def default_config_text() -> str:
    """The full default config, as shown by ``--help``."""
    lines = []
    sections = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(RunConfig(), f.name)
        if dataclasses.is_dataclass(value):
            sections.append((f.name, value))
        else:
            lines.append(f"{f.name} = {_toml(value)}")
    for name, sec in sections:
        lines.append(f"[{name}]")
        for f in dataclasses.fields(sec):
            lines.append(f"  {f.name} = {_toml(getattr(sec, f.name))}")
    return "\n".join(lines)


def _toml(value) -> str:
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml(v) for v in value) + "]"
    return repr(value)
