"""Command line entry point: ``heatid <subcommand> --config FILE [overrides]``.

Exit codes: 0 ok, 2 config error, 3 solver error, 4 empty identifiable
interval, 1 anything else.  ``summary.json`` is written for every run.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import COMMANDS, ParseError, RunConfig, ValidationError, default_config_text, parse_config
from .elliptic import solve_elliptic, write_field_csv
from .grid import BoundaryCurve, StructuredGrid, read_trace_csv, trace_extract, write_trace_csv
from .harness import (DesignInfeasible, EquilibriumNotReached, Experiment, ExperimentDesign,
                      convergence_study, design_ramp, equilibrium_mode, stability_study)
from .inverse import EmptyIdentifiableInterval, error_sup, reconstruct_elliptic, reconstruct_parabolic, write_result
from .kirchhoff import builtin_law, check_admissible, read_law_csv
from .parabolic import NewtonDivergence, Ramp, Schedule, max_ut_norm, simulate
from .poisson import CompatibilityViolation, SolverDivergence, project_compatible

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_SOLVER, EXIT_IDENT = 0, 1, 2, 3, 4
SOLVER_ERRORS = (SolverDivergence, NewtonDivergence, CompatibilityViolation, DesignInfeasible,
                 EquilibriumNotReached)


def load_law(spec: str, meta: str = ""):
    if ":" in spec and not Path(spec).exists():
        return builtin_law(spec)
    return read_law_csv(spec, meta or None)


def output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    root = os.environ.get("HEATID_OUT")
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _experiment(cfg: RunConfig) -> Experiment:
    return Experiment(cfg.n, cfg.curve.edge, cfg.curve.lo, cfg.curve.hi, cfg.experiment.amplitude)


def _design(cfg: RunConfig) -> ExperimentDesign:
    if cfg.design.file:
        return ExperimentDesign.load(cfg.design.file)
    s, d = cfg.schedule, cfg.design
    return ExperimentDesign(d.g1, d.g2, d.eps, cfg.experiment.amplitude, s.t_ramp, cfg.n,
                            cfg.curve.edge, cfg.curve.lo, cfg.curve.hi, s.ramp_steps,
                            s.hold_steps, d.c1, cfg.reconstruct.c_min)


def _schedule(cfg: RunConfig) -> Schedule:
    s = cfg.schedule
    exp = _experiment(cfg)
    dt = s.t_ramp / s.ramp_steps
    return Schedule((s.ramp_steps + s.hold_steps) * dt, dt, exp.flux, 0.0, Ramp(s.ramp, s.t_ramp))


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _score(cfg: RunConfig, result, metrics: dict) -> None:
    if cfg.truth:
        metrics["sup_error"] = error_sup(result, load_law(cfg.truth))


def cmd_forward_elliptic(cfg, out, metrics):
    law = load_law(cfg.law, cfg.law_meta)
    report = check_admissible(law)
    metrics["admissible"] = report.ok
    exp = _experiment(cfg)
    f, j = project_compatible(exp.grid, exp.source, exp.flux)
    u = solve_elliptic(exp.grid, law, f, j, project=False, tol=cfg.tolerances.linear)
    write_field_csv(exp.grid, u, out / "field.csv")
    trace = trace_extract(u, exp.curve, exp.grid)
    write_trace_csv(trace, out / "trace.csv")
    metrics.update(u_min=float(u.min()), u_max=float(u.max()),
                   trace_range=[float(trace.values.min()), float(trace.values.max())])
    return ["field.csv", "trace.csv"]


def cmd_forward_parabolic(cfg, out, metrics):
    law = load_law(cfg.law, cfg.law_meta)
    exp = _experiment(cfg)
    sched = _design(cfg).schedule() if cfg.design.file else _schedule(cfg)
    traj = simulate(exp.grid, law, sched, exp.curve, tol=cfg.tolerances.newton)
    write_trace_csv(traj.trace, out / "trace.csv")
    files = ["trace.csv"]
    stride = cfg.schedule.snapshot_stride
    if stride:
        X, Y = exp.grid.mesh()
        rows = ((t, x, y, v) for k, t in enumerate(traj.times) if k % stride == 0
                for x, y, v in zip(X.ravel(), Y.ravel(), traj.fields[k].ravel()))
        _write_rows(out / "snapshots.csv", ["t", "x", "y", "u"], rows)
        files.append("snapshots.csv")
    metrics.update(steps=traj.steps, T=float(traj.times[-1]), max_ut_norm=max_ut_norm(traj))
    return files


def cmd_reconstruct(cfg, out, metrics):
    exp = _experiment(cfg)
    if not cfg.reconstruct.trace:
        raise ValidationError("reconstruct.trace is required")
    g = read_trace_csv(cfg.reconstruct.trace, exp.curve)
    r = cfg.reconstruct
    result = reconstruct_elliptic(exp.grid, exp.source, exp.flux, g, c_min=r.c_min, trim=r.trim,
                                  smoothing=r.smoothing, project=True, tol=cfg.tolerances.linear)
    _score(cfg, result, metrics)
    write_result(result, out / "result.csv", {k: v for k, v in metrics.items()})
    metrics.update(interval=list(result.interval), min_slope=result.min_slope)
    return ["result.csv", "result.json"]


def cmd_reconstruct_parabolic(cfg, out, metrics):
    exp = _experiment(cfg)
    if not cfg.reconstruct.trace:
        raise ValidationError("reconstruct.trace is required")
    g = read_trace_csv(cfg.reconstruct.trace, exp.curve)
    if cfg.design.file:
        design = _design(cfg)
        sched, t1 = design.schedule(), design.t_ramp
    else:
        sched, t1 = _schedule(cfg), cfg.schedule.t_ramp
    times = g.times[g.times >= t1 - 1e-12]
    r = cfg.reconstruct
    result = reconstruct_parabolic(exp.grid, sched.data, g, times, c_min=r.c_min, trim=r.trim,
                                   smoothing=r.smoothing, tol=cfg.tolerances.linear)
    _score(cfg, result, metrics)
    write_result(result, out / "result.csv", dict(metrics))
    metrics.update(interval=list(result.interval), times_used=int(times.size))
    return ["result.csv", "result.json"]


def cmd_design(cfg, out, metrics):
    law = load_law(cfg.law, cfg.law_meta)
    d = cfg.design
    design = design_ramp((law.a_lower, law.a_upper), d.g1, d.g2, d.eps, n=cfg.n, c1=d.c1,
                         c_min=cfg.reconstruct.c_min, margin=d.margin, edge=cfg.curve.edge,
                         curve_lo=cfg.curve.lo, curve_hi=cfg.curve.hi,
                         ramp_steps=cfg.schedule.ramp_steps, hold_steps=cfg.schedule.hold_steps)
    design.save(out / "design.json")
    metrics.update(amplitude=design.amplitude, t_ramp=design.t_ramp, max_ut=design.max_ut,
                   ut_budget=design.ut_budget)
    return ["design.json"]


def cmd_stability(cfg, out, metrics):
    truth = load_law(cfg.truth or cfg.law, cfg.law_meta)
    study = stability_study(truth, cfg.stability.deltas, cfg.stability.mode, _experiment(cfg),
                            jobs=cfg.jobs)
    _write_rows(out / "stability.csv", ["delta", "error"], study["rows"])
    metrics.update(mode=study["mode"], slope=study["slope"])
    return ["stability.csv"]


def cmd_convergence(cfg, out, metrics):
    truth = load_law(cfg.truth or cfg.law, cfg.law_meta)
    study = convergence_study(truth, cfg.convergence.sizes, _experiment(cfg), jobs=cfg.jobs)
    _write_rows(out / "convergence.csv",
                ["n", "h", "poisson_error", "forward_error", "reconstruction_error"], study["rows"])
    metrics.update({k: v for k, v in study.items() if k.endswith("orders")})
    return ["convergence.csv"]


def cmd_equilibrium(cfg, out, metrics):
    truth = load_law(cfg.truth or cfg.law, cfg.law_meta)
    tol = cfg.tolerances
    result = equilibrium_mode(truth, _design(cfg), dt=tol.equilibrium_dt, tol=tol.equilibrium)
    metrics["sup_error"] = error_sup(result, truth)
    write_result(result, out / "result.csv", dict(metrics))
    metrics["interval"] = list(result.interval)
    return ["result.csv", "result.json"]


HANDLERS = {
    "forward-elliptic": cmd_forward_elliptic,
    "forward-parabolic": cmd_forward_parabolic,
    "reconstruct": cmd_reconstruct,
    "reconstruct-parabolic": cmd_reconstruct_parabolic,
    "design": cmd_design,
    "stability": cmd_stability,
    "convergence": cmd_convergence,
    "equilibrium": cmd_equilibrium,
}


def versions() -> dict:
    return {"heatid": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(cfg: RunConfig) -> int:
    """Dispatch one subcommand and write ``summary.json``; return the exit code."""
    out = output_dir(cfg)
    metrics: dict = {}
    summary = {"command": cfg.command, "versions": versions(), "config": cfg.to_dict()}
    try:
        files = HANDLERS[cfg.command](cfg, out, metrics)
        code, error = EXIT_OK, None
    except EmptyIdentifiableInterval as exc:
        code, error, files = EXIT_IDENT, exc, []
    except (ParseError, ValidationError) as exc:
        code, error, files = EXIT_CONFIG, exc, []
    except SOLVER_ERRORS as exc:
        code, error, files = EXIT_SOLVER, exc, []
    except Exception as exc:  # noqa: BLE001 - reported in the summary
        code, error, files = EXIT_OTHER, exc, []
    summary.update(
        status="ok" if code == EXIT_OK else "error",
        exit_code=code,
        error=None if error is None else {"type": type(error).__name__, "message": str(error)},
        metrics=metrics,
        outputs=files,
    )
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_jsonable) + "\n")
    if error is not None:
        print(f"heatid {cfg.command}: {type(error).__name__}: {error}", file=sys.stderr)
    return code


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="heatid",
        description="Identify a nonlinear conduction law a(u) from one boundary temperature trace.",
        epilog="defaults (TOML keys):\n" + default_config_text()
               + "\n\nHEATID_OUT prefixes relative output directories.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. --set curve.lo=0.2")
    p.add_argument("--n", type=int, help="grid nodes per side")
    p.add_argument("--law", help="builtin law (const:k, tanh:amp,rate, sin:amp,freq) or s,a CSV")
    p.add_argument("--truth", help="true law used to score reconstructions")
    p.add_argument("--out", dest="output", help="output directory")
    p.add_argument("--jobs", type=int, help="parallel study jobs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides, command=args.command, n=args.n,
                           law=args.law, truth=args.truth, output=args.output, jobs=args.jobs)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"heatid: config error: {exc}", file=sys.stderr)
        fallback = RunConfig(command=args.command, output=args.output or RunConfig.output)
        out = output_dir(fallback)
        summary = {"command": args.command, "versions": versions(), "status": "error",
                   "exit_code": EXIT_CONFIG,
                   "error": {"type": type(exc).__name__, "message": str(exc)}}
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
