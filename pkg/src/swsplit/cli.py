"""Command-line front end: `analyze` prints a stability report, `run`
drives the simulator and writes snapshots/gauges/log/summary.

Exit codes: 0 ok, 1 fault (bad input, solver failure), 2 stability-gate
refusal.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

from . import __version__
from .config import Config, ConfigError, apply_overrides, load_config
from .fem import assemble
from .forcing import Forcings, ForcingError, load_tide, load_wind
from .implicit_step import SolverError
from .mesh import MeshError, load_mesh
from .simulator import GateError, OutputWriter, RunConfig, load_snapshot, run
from .stability import PhysicalParams, StabilityReport, build_report
from .state import initial_state

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_GATE = 2


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; code 2 is reserved for the stability gate."""

    def error(self, message):
        self.exit(EXIT_FAULT, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="swsplit",
                     description="Shallow-water splitting solver and "
                                 "time-step stability analyzer")
    parser.add_argument("--version", action="version", version=f"swsplit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", metavar="PATH",
                        help="key=value config file (defaults used when absent)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append",
                        default=[], dest="overrides",
                        help="override one config key (repeatable)")

    analyze = sub.add_parser("analyze", parents=[common],
                             help="evaluate the critical explicit time step")
    analyze.add_argument("--tau", type=float, default=None,
                         help="explicit step to rate (default: config tau)")
    analyze.add_argument("--speed", type=float, default=0.1,
                         help="flow speed |u| in m/s (default 0.1)")
    analyze.add_argument("--depth", type=float, default=0.1,
                         help="water depth H in m (default 0.1)")
    analyze.add_argument("--machine", action="store_true",
                         help="emit key=value lines instead of the table")

    runp = sub.add_parser("run", parents=[common], help="advance a simulation")
    runp.add_argument("--machine", action="store_true",
                      help="emit the summary as key=value lines on stdout")
    return parser


def _load_cfg(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def report_lines(report: StabilityReport, machine: bool):
    a, b, c, d = report.cubic
    pairs = [
        ("tau", report.tau), ("speed", report.speed), ("depth", report.depth),
        ("drag", report.drag), ("alpha", report.alpha), ("beta", report.beta),
        ("modulus", report.modulus),
        ("cubic_a", a), ("cubic_b", b), ("cubic_c", c), ("cubic_d", d),
        ("tau_c_cubic", report.tau_c_cubic),
        ("tau_c_modulus", report.tau_c_modulus),
        ("convergent_cubic", report.convergent_cubic),
        ("convergent_modulus", report.convergent_modulus),
    ]
    if machine:
        return [f"{key}={_fmt(value)}" for key, value in pairs]
    width = max(len(key) for key, _ in pairs)
    lines = ["stability report"]
    lines += [f"  {key:<{width}}  {_fmt(value)}" for key, value in pairs]
    if math.isnan(report.tau_c_cubic):
        lines.append("  note: drag rate is zero, the source update never converges")
    return lines


def cmd_analyze(args) -> int:
    cfg = _load_cfg(args)
    params = PhysicalParams(g=cfg.g, k0=cfg.k0, k1=cfg.k1, xi=cfg.xi, h_min=cfg.h_min)
    tau = cfg.tau if args.tau is None else args.tau
    if tau <= 0:
        raise ConfigError("tau must be positive")
    if args.depth <= 0:
        raise ConfigError("depth must be positive")
    if args.speed < 0:
        raise ConfigError("speed must be >= 0")
    report = build_report(tau, args.speed, args.depth, params)
    for line in report_lines(report, args.machine):
        print(line)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    if cfg.mesh is None:
        raise ConfigError("run requires a mesh (set mesh=PATH)")
    mesh = load_mesh(cfg.mesh, h_min=cfg.h_min)
    params = PhysicalParams(g=cfg.g, k0=cfg.k0, k1=cfg.k1, xi=cfg.xi, h_min=cfg.h_min)
    forcings = Forcings(
        tide=load_tide(cfg.tide) if cfg.tide else None,
        wind=load_wind(cfg.wind) if cfg.wind else None,
    )
    if cfg.restart:
        state = load_snapshot(cfg.restart, mesh.n_nodes)
    else:
        state = initial_state(mesh.n_nodes, eta0=cfg.eta0)
    matrices = assemble(mesh)
    run_cfg = RunConfig(
        tau=cfg.tau, tau_tilde=cfg.tau_tilde, theta1=cfg.theta1, theta2=cfg.theta2,
        duration=cfg.duration, snapshot_interval=cfg.snapshot_interval,
        gauges=cfg.gauges, gate_mode=cfg.gate_mode, cg_tol=cfg.cg_tol,
        cg_precondition=cfg.cg_precondition,
        consistent_correction=cfg.consistent_correction,
    )
    sinks = OutputWriter(cfg.out_dir, mesh, gauge_nodes=cfg.gauges)
    try:
        summary = run(state, mesh, matrices, params, run_cfg, forcings, sinks=sinks)
    except Exception as exc:
        summary = getattr(exc, "run_summary", None)
        if summary is not None:
            _write_summary(cfg.out_dir, summary)
        raise
    _write_summary(cfg.out_dir, summary)
    if args.machine:
        for line in summary.as_lines():
            print(line)
    else:
        print(f"completed {summary.steps} steps; outputs in {cfg.out_dir}")
    return EXIT_OK


def _write_summary(out_dir, summary):
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write("\n".join(summary.as_lines()) + "\n")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return cmd_analyze(args)
        return cmd_run(args)
    except SystemExit as exc:   # argparse --help / usage errors
        return int(exc.code or 0)
    except GateError as exc:
        print(f"swsplit: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (ConfigError, MeshError, ForcingError, SolverError, ValueError,
            FloatingPointError, OSError) as exc:
        print(f"swsplit: {exc}", file=sys.stderr)
        return EXIT_FAULT


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
