"""Command line front end: single runs and convergence tables written to disk."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .diagnostics import convergence_table
from .presets import PRESET_NAMES, ConfigError, ExperimentPreset, parse_config, preset, run_preset
from .scheme import SchemeInstability, time_step

log = logging.getLogger("kdvfd")

SNAPSHOTS_DEFAULT = 10
DIAG_HEADER = ("step", "t", "l2", "sup", "mass", "dissipation", "l2_ok", "entropy_ok")


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def default_record_every(p: ExperimentPreset) -> int:
    """Stride giving roughly ``SNAPSHOTS_DEFAULT`` snapshots over the run."""
    dt = time_step(p.config, p.initial_data())
    steps = max(1, math.ceil(p.config.t_end / dt - 1e-9)) if p.config.t_end > 0 else 1
    return max(1, steps // SNAPSHOTS_DEFAULT)


def write_snapshot(path: Path, x: np.ndarray, u: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "u"))
        for xi, ui in zip(x, u):
            w.writerow((fmt(float(xi)), fmt(float(ui))))


def write_diagnostics(path: Path, diags) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_HEADER)
        for d in diags:
            w.writerow(
                (
                    fmt(d.step),
                    fmt(d.t),
                    fmt(d.l2),
                    fmt(d.sup),
                    fmt(d.mass),
                    fmt(d.dissipation),
                    fmt(d.ineq_L2_ok),
                    fmt(d.ineq_cell_entropy_ok),
                )
            )


def run_experiment(p: ExperimentPreset, n_cells: Optional[int], output_dir) -> int:
    """Run ``p`` (optionally at a new resolution) and write its outputs.

    Files: one ``snap_t<t>.csv`` per recorded time, ``diagnostics.csv``
    and ``summary.json``. Returns 0 on success, 1 if an inequality flag
    failed, 2 if the solver aborted.
    """
    if n_cells is not None:
        p = p.with_config(n_cells=n_cells)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"preset": p.name, "n_cells": p.config.n_cells, "t_end": p.config.t_end, "dt_rule": p.config.dt_rule.value}
    try:
        res = run_preset(p)
    except SchemeInstability as exc:
        log.error("solver aborted: %s", exc)
        summary.update(status="aborted", error=str(exc), step=exc.step, t=exc.t)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        return 2

    traj, diags = res.trajectory, res.diagnostics
    x = p.config.x
    for t, snap in zip(traj.times, traj.snapshots):
        write_snapshot(out / f"snap_t{fmt(t)}.csv", x, snap.values)
    write_diagnostics(out / "diagnostics.csv", diags)

    failed = [d.step for d in diags if d.failed]
    last = diags[-1]
    summary.update(
        status="flag_failed" if failed else "ok",
        E_percent=res.error_E,
        steps=traj.steps_taken,
        dt=traj.dt_used,
        # lambda = dt / dx^{3/2}, reported for every dt rule
        **{"lambda": traj.lam},
        dx=p.config.dx,
        l2_final=last.l2,
        mass_final=last.mass,
        l2_ok=last.ineq_L2_ok,
        entropy_ok=last.ineq_cell_entropy_ok,
        alpha_ok=last.ineq_alpha_ok,
        failed_steps=failed[:20],
    )
    summary = {k: _jsonable(v) for k, v in summary.items()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if res.error_E is not None:
        print(f"E_percent {fmt(res.error_E)}")
    print(f"steps {traj.steps_taken} dt {fmt(traj.dt_used)} lambda {fmt(traj.lam)}")
    return 1 if failed else 0


def emit_convergence_table(p: ExperimentPreset, n_list: Sequence[int], output_path=None, oracle: bool = False) -> int:
    """Sweep ``n_list`` and write ``n_cells,E_percent,rate`` as CSV (stdout if no path)."""
    try:
        rows = convergence_table(p, n_list, oracle=oracle)
    except SchemeInstability as exc:
        log.error("solver aborted: %s", exc)
        return 2
    lines = ["n_cells,E_percent,rate"]
    lines += [f"{r.n_cells},{fmt(r.error_E)},{fmt(r.rate)}" for r in rows]
    text = "\n".join(lines) + "\n"
    if output_path is None:
        sys.stdout.write(text)
    else:
        Path(output_path).write_text(text)
        sys.stdout.write(text)
    return 0


def _n_list(text: str) -> list:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty resolution list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kdvfd", description="Implicit finite-difference KdV experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset", choices=[n for n in PRESET_NAMES if n != "custom"])
        src.add_argument("--config", type=Path, help="flat JSON file with SchemeConfig fields")
        sp.add_argument("--dt-rule", choices=["cfl", "k2", "courant"])
        sp.add_argument("--k", type=float, help="K in dt = K dx^2")
        sp.add_argument("--courant", type=float, help="c in dt = c dx / max|u0|")
        sp.add_argument("--delta", type=float, help="delta of the L2 stability constraint")
        sp.add_argument("--delta-tilde", type=float)
        sp.add_argument("--t-end", type=float)

    r = sub.add_parser("run", help="single run writing snapshots, diagnostics and a summary")
    common(r)
    r.add_argument("--n", type=int, help="number of grid cells")
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--record-every", type=int)
    r.add_argument("--no-check", action="store_true", help="skip the per-step inequality checks")

    t = sub.add_parser("table", help="relative error and observed rate over a resolution sweep")
    common(t)
    t.add_argument("--n", type=_n_list, required=True, help="e.g. 500,1000,2000")
    t.add_argument("--out", type=Path)
    t.add_argument("--oracle", action="store_true", help="replace numerics by exact samples")
    return ap


def _resolve(args) -> ExperimentPreset:
    p = parse_config(args.config) if args.config else preset(args.preset)
    changes = {
        "dt_rule": args.dt_rule,
        "k": args.k,
        "courant": args.courant,
        "cfl_delta": args.delta,
        "cfl_delta_tilde": args.delta_tilde,
        "t_end": args.t_end,
    }
    if getattr(args, "record_every", None) is not None:
        changes["record_every"] = args.record_every
    if getattr(args, "no_check", False):
        changes["check"] = False
    changes = {k: v for k, v in changes.items() if v is not None}
    try:
        return p.with_config(**changes) if changes else p
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        p = _resolve(args)
        if args.command == "run":
            if args.n is not None:
                p = p.with_config(n_cells=args.n)
            if args.record_every is None:
                p = p.with_config(record_every=default_record_every(p))
            return run_experiment(p, None, args.out)
        return emit_convergence_table(p, args.n, args.out, oracle=args.oracle)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
