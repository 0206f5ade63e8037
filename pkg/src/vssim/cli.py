"""Command-line entry points.

Subcommands:
    run        simulate a config or built-in scenario; write trace CSV,
               events JSONL, staircase JSON, and figures
    sweep      grid over parameter overrides, one summary row per point
    analyze    stiffness-range and timing-window tables from params only,
               or staircase recomputation from a previous run directory
    serve      live session endpoint (WebSocket + NDJSON TCP fallback)
    calibrate  emit a synthetic torque-angle calibration table

Exit codes: 0 ok, 2 bad config/input (JSON error details on stderr),
3 port in use, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    TIMING_WINDOW_NOTE,
    staircase_metrics,
    stiffness_range_report,
    timing_window,
)
from .calibration import generate_synthetic_calibration, save_calibration_csv
from .config import config_from_dict, config_to_dict, load_run_config, scenario_config
from .errors import ConfigError, VssimError
from .mechanism import MechanismParams
from .sim import SimConfig, Trace, replication_config, simulate

log = logging.getLogger("vssim")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_PORT_IN_USE = 3


def _setup_logging() -> None:
    level_name = os.environ.get("VSS_SIM_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _error_json(kind: str, message: str, field: str | None = None) -> None:
    doc = {"error": kind, "message": message}
    if field:
        doc["field"] = field
    print(json.dumps(doc), file=sys.stderr)


def _load_config(args) -> tuple[SimConfig, dict]:
    if getattr(args, "scenario", None):
        params = MechanismParams()
        if getattr(args, "config", None):
            base, _ = load_run_config(args.config)
            params = base.params
        return scenario_config(args.scenario, params), {}
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return replication_config(), {}


def _meta(args) -> dict | None:
    if getattr(args, "no_meta", False):
        return None
    return {
        "generator": f"vssim {__version__}",
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


def _out_dir(args, extras: dict | None = None) -> Path:
    out = args.out or (extras or {}).get("output_dir") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, doc: dict, meta: dict | None) -> None:
    if meta:
        doc = {"meta": meta, **doc}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    config, extras = _load_config(args)
    out = _out_dir(args, extras)
    meta = _meta(args)

    trace = simulate(config)
    report = staircase_metrics(trace)

    (out / "config.json").write_text(
        json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8")
    trace.write_csv(out / "trace.csv", meta)
    trace.write_events_jsonl(out / "events.jsonl")
    _write_json(out / "staircase.json", report.to_dict(), meta)

    if not args.no_plots:
        from .plots import render_trace_figure
        render_trace_figure(trace, out / "trace.png")

    summary = report.to_dict()["summary"]
    print(f"run: {len(trace)} samples, {len(trace.events)} events -> {out}")
    print(f"  detents visited {summary['detent_min']}..{summary['detent_max']}, "
          f"max float {summary['max_float_amplitude'] * 1000.0:.3f} mm")
    if summary["max_up_latency"] is not None:
        print(f"  max up-shift latency {summary['max_up_latency']:.3f} s")
    return EXIT_OK


def _parse_sweep_params(specs: list[str]) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    valid = {f.name for f in dataclasses.fields(MechanismParams)}
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"--param needs NAME=v1,v2,... got {spec!r}", field="param")
        name, _, values = spec.partition("=")
        name = name.strip()
        if name not in valid:
            raise ConfigError(f"unknown parameter {name!r}", field=name)
        try:
            grid[name] = [float(v) for v in values.split(",") if v != ""]
        except ValueError as exc:
            raise ConfigError(f"bad value list for {name}: {exc}", field=name) from exc
        if not grid[name]:
            raise ConfigError(f"no values given for {name}", field=name)
    return grid


def cmd_sweep(args) -> int:
    base_config, extras = _load_config(args)
    out = _out_dir(args, extras)
    grid = _parse_sweep_params(args.param)
    names = sorted(grid)
    meta = _meta(args)

    rows = []
    base_params = dataclasses.asdict(base_config.params)
    for combo in itertools.product(*(grid[n] for n in names)):
        overrides = dict(zip(names, combo))
        params_doc = {**base_params, **overrides}
        try:
            params = MechanismParams(**params_doc)
            config = SimConfig(params=params, profile=base_config.profile,
                               schedule=base_config.schedule, dt=base_config.dt,
                               duration=base_config.duration,
                               initial_index=base_config.initial_index)
            trace = simulate(config)
            report = staircase_metrics(trace).to_dict()["summary"]
            row = {**overrides,
                   "detent_max": report["detent_max"],
                   "detent_min": report["detent_min"],
                   "peak_abs_tau": float(np.max(np.abs(trace.tau))),
                   "max_float_amplitude": report["max_float_amplitude"],
                   "max_up_latency": report["max_up_latency"],
                   "n_events": len(trace.events),
                   "status": "ok"}
        except VssimError as exc:
            row = {**overrides, "detent_max": None, "detent_min": None,
                   "peak_abs_tau": None, "max_float_amplitude": None,
                   "max_up_latency": None, "n_events": None,
                   "status": f"error: {exc}"}
        rows.append(row)
        printable = ", ".join(f"{k}={v:g}" for k, v in overrides.items())
        print(f"sweep point {printable}: {row['status']}")

    header = names + ["detent_max", "detent_min", "peak_abs_tau",
                      "max_float_amplitude", "max_up_latency", "n_events", "status"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if row[h] is None else str(row[h]) for h in header))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "sweep.json", {"rows": rows}, meta)

    if not args.no_plots and rows and any(r["status"] == "ok" for r in rows):
        from .plots import render_sweep
        ok_rows = [r for r in rows if r["status"] == "ok"]
        render_sweep(ok_rows, names, "max_up_latency", out / "sweep.png")
    print(f"sweep: {len(rows)} points -> {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    meta = _meta(args)

    if args.from_run:
        run_dir = Path(args.from_run)
        config, _ = load_run_config(run_dir / "config.json")
        trace = Trace.from_csv(run_dir / "trace.csv", config=config)
        report = staircase_metrics(trace, config.params)
        _write_json(out / "staircase.json", report.to_dict(), meta)
        print(f"analyze: staircase recomputed from {run_dir} -> {out / 'staircase.json'}")
        return EXIT_OK

    config, _ = _load_config(args)
    params = config.params

    range_report = stiffness_range_report(params)
    _write_json(out / "stiffness_range.json", range_report.to_dict(), meta)
    lines = ["detent,x_m,k_nm_per_rad,tau_nm_at_30deg"]
    print(f"{'detent':>6} {'x (mm)':>9} {'k (Nm/rad)':>11} {'tau@30deg (Nm)':>15}")
    for r in range_report.rows:
        lines.append(f"{r.index},{r.x!r},{r.k!r},{r.tau_at_30deg!r}")
        print(f"{r.index:>6} {r.x * 1000.0:>9.3f} {r.k:>11.2f} {r.tau_at_30deg:>15.2f}")
    (out / "stiffness_range.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    q_values = [float(q) for q in args.q]
    theta_max = config.profile.theta_max
    windows = []
    print(f"\n{'q':>10} {'bound dt/T':>11} {'exact dt/T':>11}")
    for q in q_values:
        w = timing_window(q)
        windows.append({"q": w.q, "bound_fraction": w.bound_fraction,
                        "exact_fraction": w.exact_fraction})
        print(f"{q:>10.4g} {w.bound_fraction:>11.5f} {w.exact_fraction:>11.5f}")
    _write_json(out / "timing_window.json",
                {"note": TIMING_WINDOW_NOTE, "amplitude_rad": theta_max,
                 "windows": windows}, meta)
    lines = ["q,bound_fraction,exact_fraction"]
    for w in windows:
        lines.append(f"{w['q']!r},{w['bound_fraction']!r},{w['exact_fraction']!r}")
    (out / "timing_window.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if not args.no_plots:
        from .plots import render_stiffness_range, render_timing_window
        render_stiffness_range(range_report, out / "stiffness_range.png")
        render_timing_window(out / "timing_window.png")
    print(f"\nanalyze: tables -> {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config, extras = _load_config(args)
    out = _out_dir(args, extras)
    table = generate_synthetic_calibration(
        config.params,
        angle_step=math.radians(args.angle_step_deg),
        theta_span=math.radians(args.span_deg),
    )
    save_calibration_csv(table, out / "calibration.csv")
    if not args.no_plots:
        from .plots import render_calibration
        render_calibration(table, out / "calibration.png")
    print(f"calibrate: {len(table.detents)} curves -> {out / 'calibration.csv'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import port_available, serve

    config, _ = _load_config(args)
    if not port_available(args.port):
        _error_json("port", f"port {args.port} already in use")
        return EXIT_PORT_IN_USE
    tcp_port = args.tcp_port if args.tcp_port is not None else args.port + 1
    if not port_available(tcp_port):
        _error_json("port", f"tcp fallback port {tcp_port} already in use")
        return EXIT_PORT_IN_USE
    ui_dir = args.ui_dir
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if candidate.is_dir():
            ui_dir = candidate
    print(f"serving live session on :{args.port} (ws at /ws, NDJSON tcp on "
          f":{tcp_port}, tick {args.tick:g} Hz, dt {config.dt:g} s)")
    if ui_dir:
        print(f"dashboard: http://localhost:{args.port}/ (from {ui_dir})")
    serve(config, port=args.port, tick_hz=args.tick, speed=args.speed,
          ui_dir=ui_dir, tcp_port=tcp_port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vssim",
        description="Simulator of a hand-shifted variable stiffness spring joint.")
    parser.add_argument("--version", action="version", version=f"vssim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--config", help="run config JSON path")
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--no-meta", action="store_true",
                       help="omit timestamped metadata from outputs")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
        if scenario:
            p.add_argument("--scenario", choices=["replication"],
                           help="use a built-in scenario instead of a schedule")

    p_run = sub.add_parser("run", help="simulate and write trace/report files")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid over mechanism parameters")
    common(p_sweep)
    p_sweep.add_argument("--param", action="append", required=True,
                         help="NAME=v1,v2,... (repeatable)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="closed-form tables, or staircase from a run dir")
    common(p_an)
    p_an.add_argument("--from-run", help="recompute the staircase report from a run directory")
    p_an.add_argument("--q", nargs="*", default=["0.0001", "0.01", "0.04", "0.25", "1.0"],
                      help="force ratios for the timing-window table")
    p_an.set_defaults(func=cmd_analyze)

    p_cal = sub.add_parser("calibrate", help="emit a synthetic calibration table CSV")
    common(p_cal)
    p_cal.add_argument("--angle-step-deg", type=float, default=1.0)
    p_cal.add_argument("--span-deg", type=float, default=30.0)
    p_cal.set_defaults(func=cmd_calibrate)

    p_srv = sub.add_parser("serve", help="start the live session endpoint")
    p_srv.add_argument("--config", help="run config JSON path")
    p_srv.add_argument("--scenario", choices=["replication"])
    p_srv.add_argument("--port", type=int, default=8080)
    p_srv.add_argument("--tcp-port", type=int, default=None,
                       help="NDJSON fallback port (default: port+1)")
    p_srv.add_argument("--tick", type=float, default=50.0, help="state frame rate, Hz")
    p_srv.add_argument("--speed", type=float, default=1.0,
                       help="sim-time per wall-time multiplier (0 = unpaced)")
    p_srv.add_argument("--ui-dir", help="directory of built dashboard assets")
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _error_json("config", str(exc), exc.field)
        return EXIT_CONFIG
    except VssimError as exc:
        _error_json(exc.__class__.__name__.lower(), str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _error_json("os", str(exc))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
