"""Time loop: gated explicit sub-cycling, implicit wave solve, output.

One outer step of length tau_tilde runs n_sub = tau_tilde / tau explicit
sub-steps that accumulate the source increment, solves the elevation
system, back-substitutes the velocity increments and applies boundary
data, so end-of-step states honor the boundary conditions exactly at
output times.  A stability gate checks tau against the critical step of
the worst node before every outer step.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .explicit_step import SourceIncrement, taylor_galerkin_increment, total_height
from .fem import FemMatrices, helmholtz_matrix
from .forcing import Forcings
from .implicit_step import (LinearSolveStats, ThetaConfig, apply_boundaries,
                            elevation_rhs, project_land_velocity, solve_elevation,
                            velocity_correction)
from .mesh import Mesh
from .stability import PhysicalParams, critical_time_step_for_drag
from .state import State

log = logging.getLogger(__name__)

GATE_MODES = ("enforce", "warn", "off")

# floor on |u| inside the gate only: a quiescent start has zero drag and
# the undamped recursion never converges, so the gate rates tau against
# a minimal drag instead of refusing everything
U_FLOOR = 1e-3  # m/s


class GateError(RuntimeError):
    """Stability gate refused the configured explicit step."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


@dataclass(frozen=True)
class RunConfig:
    """Outer-loop configuration."""

    tau: float = 3.0
    tau_tilde: float = 300.0
    theta1: float = 0.5
    theta2: float = 0.5
    duration: float = 0.0
    snapshot_interval: float = 0.0   # 0: initial and final snapshot only
    gauges: tuple = ()
    gate_mode: str = "enforce"
    cg_tol: float = 1e-10
    cg_precondition: bool = False
    consistent_correction: bool = False

    def __post_init__(self):
        if self.tau <= 0.0 or self.tau_tilde <= 0.0:
            raise ValueError("tau and tau_tilde must be positive")
        if self.gate_mode not in GATE_MODES:
            raise ValueError(f"gate_mode must be one of {GATE_MODES}")
        self.n_sub  # validates divisibility
        _check_multiple(self.duration, self.tau_tilde, "duration")
        if self.snapshot_interval:
            _check_multiple(self.snapshot_interval, self.tau_tilde,
                            "snapshot_interval")

    @property
    def n_sub(self) -> int:
        n = self.tau_tilde / self.tau
        n_int = round(n)
        if n_int < 1 or abs(n_int * self.tau - self.tau_tilde) > 1e-9 * self.tau_tilde:
            raise ValueError(
                f"tau_tilde={self.tau_tilde:g} is not an integer multiple of tau={self.tau:g}")
        return n_int

    @property
    def n_steps(self) -> int:
        return 0 if self.duration == 0.0 else round(self.duration / self.tau_tilde)

    def theta(self) -> ThetaConfig:
        return ThetaConfig(self.tau_tilde, self.theta1, self.theta2)


def _check_multiple(value, base, name):
    if value < 0.0:
        raise ValueError(f"{name} must be >= 0")
    if value and abs(round(value / base) * base - value) > 1e-9 * max(value, base):
        raise ValueError(f"{name}={value:g} must be a multiple of tau_tilde={base:g}")


@dataclass(frozen=True)
class GateVerdict:
    passed: bool
    tau: float
    min_tau_c: float
    worst_node: int
    worst_drag: float
    floor_active: bool


@dataclass
class RunSummary:
    steps: int = 0
    eta_min: float = np.inf
    eta_max: float = -np.inf
    mass_initial: float = 0.0
    mass_final: float = 0.0
    mass_drift_rel: float = 0.0
    cg_worst: LinearSolveStats = LinearSolveStats(0, 0.0)
    gate_violations: int = 0
    completed: bool = False

    def as_lines(self):
        return [
            f"steps={self.steps}",
            f"completed={str(self.completed).lower()}",
            f"eta_min={self.eta_min!r}",
            f"eta_max={self.eta_max!r}",
            f"mass_initial={self.mass_initial!r}",
            f"mass_final={self.mass_final!r}",
            f"mass_drift_rel={self.mass_drift_rel!r}",
            f"cg_worst_iterations={self.cg_worst.iterations}",
            f"cg_worst_residual={self.cg_worst.residual!r}",
            f"gate_violations={self.gate_violations}",
        ]


@dataclass
class StepInfo:
    """Increments and diagnostics of one outer step.

    The update decomposes as new = old + source increment + wave
    increment, then boundary data are applied; the pieces here let a
    caller rebuild the step exactly.
    """

    d_star: SourceIncrement
    d_eta: np.ndarray
    d_u1_corr: np.ndarray
    d_u2_corr: np.ndarray
    cg: LinearSolveStats
    gate: GateVerdict


def stability_gate(state: State, mesh: Mesh, params: PhysicalParams, tau) -> GateVerdict:
    """Rate ``tau`` against the critical step of the worst node.

    Nodal drag rates use the current speed (floored at U_FLOOR) and the
    clamped total height; the verdict is tau < min over nodes of tau_c.
    tau_c is evaluated once per distinct drag value (it is not assumed
    monotone in the drag).
    """
    h_tot = total_height(state.eta, mesh, params)
    speed = np.hypot(state.u1, state.u2)
    floor_active = bool(np.any(speed < U_FLOOR))
    speed = np.maximum(speed, U_FLOOR)
    drag = params.g * speed / (params.k1 ** 2 * h_tot)

    unique, inverse = np.unique(drag, return_inverse=True)
    tau_c_unique = np.array([critical_time_step_for_drag(params.k0, d) for d in unique])
    tau_c = tau_c_unique[inverse]
    worst = int(np.argmin(tau_c))
    min_tau_c = float(tau_c[worst])
    return GateVerdict(passed=bool(tau < min_tau_c), tau=tau,
                       min_tau_c=min_tau_c, worst_node=worst,
                       worst_drag=float(drag[worst]), floor_active=floor_active)


def step(state: State, mesh: Mesh, matrices: FemMatrices, params: PhysicalParams,
         cfg: RunConfig, forcings: Forcings):
    """Advance one outer step of tau_tilde seconds.

    Returns (new_state, StepInfo).  Raises :class:`GateError` in enforce
    mode when the gate fails; solver faults propagate.
    """
    verdict = None
    if cfg.gate_mode != "off":
        verdict = stability_gate(state, mesh, params, cfg.tau)
        if not verdict.passed:
            msg = (f"stability gate: tau={cfg.tau:g} s >= critical step "
                   f"tau_c={verdict.min_tau_c:.4g} s at node {verdict.worst_node} "
                   f"(drag rate {verdict.worst_drag:.4g} 1/s)")
            if cfg.gate_mode == "enforce":
                raise GateError(msg, verdict=verdict)
            log.warning(msg)

    n = mesh.n_nodes
    acc1 = np.zeros(n)
    acc2 = np.zeros(n)
    work = State(state.eta, state.u1, state.u2, state.t)
    for s in range(cfg.n_sub):
        work.t = state.t + s * cfg.tau
        wind = forcings.wind_at(work.t)
        inc = taylor_galerkin_increment(work, mesh, params, wind, cfg.tau)
        acc1 += inc.d_u1
        acc2 += inc.d_u2
        work = State(state.eta, state.u1 + acc1, state.u2 + acc2, work.t)
    # the wall constraint acts on the source increment where it couples to
    # the wave step: without this the flux H (u + theta1 du*) pushes water
    # through closed boundaries and the basin mass drifts
    project_land_velocity(acc1, acc2, mesh)
    d_star = SourceIncrement(acc1, acc2)

    theta = cfg.theta()
    t_next = state.t + cfg.tau_tilde
    A = helmholtz_matrix(matrices, cfg.tau_tilde, cfg.theta1, cfg.theta2, params.g)
    rhs = elevation_rhs(state, d_star, matrices, mesh, theta, params.g)
    open_nodes = mesh.open_nodes
    open_values = (forcings.tide_at(t_next) - state.eta[open_nodes]
                   if open_nodes.size else np.empty(0))
    d_eta, cg_stats = solve_elevation(A, rhs, open_nodes, open_values,
                                      tol=cfg.cg_tol, precondition=cfg.cg_precondition)
    d_u1c, d_u2c = velocity_correction(state, d_eta, matrices, mesh, theta,
                                       params.g, consistent=cfg.consistent_correction,
                                       tol=cfg.cg_tol)

    new_state = State(eta=state.eta + d_eta,
                      u1=state.u1 + d_star.d_u1 + d_u1c,
                      u2=state.u2 + d_star.d_u2 + d_u2c,
                      t=t_next)
    apply_boundaries(new_state, mesh, forcings.tide, t_next)
    new_state.check()
    info = StepInfo(d_star=d_star, d_eta=d_eta, d_u1_corr=d_u1c,
                    d_u2_corr=d_u2c, cg=cg_stats, gate=verdict)
    return new_state, info


def mass_integral(eta, matrices: FemMatrices) -> float:
    """Lumped-mass integral of the elevation (conserved in closed basins)."""
    return float(matrices.M_L @ eta)


def run(state: State, mesh: Mesh, matrices: FemMatrices, params: PhysicalParams,
        cfg: RunConfig, forcings: Forcings, sinks=None) -> RunSummary:
    """Advance duration / tau_tilde outer steps, tracking diagnostics.

    ``sinks`` is an optional :class:`OutputWriter`.  On a gate refusal or
    solver fault the partial summary is attached to the raised exception.
    """
    summary = RunSummary()
    summary.mass_initial = mass_integral(state.eta, matrices)
    mass0 = summary.mass_initial
    drift_scale = abs(mass0) if abs(mass0) > 0.0 else 1.0

    def track(st):
        summary.eta_min = min(summary.eta_min, float(st.eta.min()))
        summary.eta_max = max(summary.eta_max, float(st.eta.max()))

    track(state)
    summary.mass_final = mass0
    if sinks is not None:
        sinks.snapshot(0, state)
        sinks.gauges(state)
    try:
        for k in range(1, cfg.n_steps + 1):
            state, info = step(state, mesh, matrices, params, cfg, forcings)
            summary.steps = k
            track(state)
            if info.gate is not None and not info.gate.passed:
                summary.gate_violations += 1
            if info.cg.iterations >= summary.cg_worst.iterations:
                summary.cg_worst = info.cg
            mass = mass_integral(state.eta, matrices)
            summary.mass_final = mass
            summary.mass_drift_rel = max(summary.mass_drift_rel,
                                         abs(mass - mass0) / drift_scale)
            if sinks is not None:
                sinks.log_step(k, state.t, mass, info)
                sinks.gauges(state)
                if cfg.snapshot_interval and _on_interval(state.t, cfg.snapshot_interval):
                    sinks.snapshot(k, state)
        summary.completed = True
        if sinks is not None and cfg.n_steps > 0 and not (
                cfg.snapshot_interval and _on_interval(state.t, cfg.snapshot_interval)):
            sinks.snapshot(summary.steps, state)
    except Exception as exc:
        # partial summary travels with the fault
        exc.run_summary = summary
        raise
    finally:
        if sinks is not None:
            sinks.close()
    return summary


def _on_interval(t, interval):
    k = round(t / interval)
    return abs(k * interval - t) <= 1e-9 * max(abs(t), interval)


class OutputWriter:
    """CSV snapshot/gauge files plus a plain-text run log.

    snap_<step>.csv: node,x1,x2,eta,u1,u2 ; gauge_<id>.csv: t,eta ; all
    floats written with repr for byte-reproducible output.
    """

    def __init__(self, out_dir, mesh: Mesh, gauge_nodes=()):
        self.out_dir = out_dir
        self.mesh = mesh
        os.makedirs(out_dir, exist_ok=True)
        self.gauge_nodes = tuple(int(g) for g in gauge_nodes)
        for gid in self.gauge_nodes:
            if not (0 <= gid < mesh.n_nodes):
                raise ValueError(f"gauge node {gid} outside mesh (n={mesh.n_nodes})")
        self._gauge_files = {
            gid: open(os.path.join(out_dir, f"gauge_{gid}.csv"), "w")
            for gid in self.gauge_nodes
        }
        for fh in self._gauge_files.values():
            fh.write("t,eta\n")
        self._log = open(os.path.join(out_dir, "run.log"), "w")

    def snapshot(self, step_idx, state: State):
        path = os.path.join(self.out_dir, f"snap_{step_idx}.csv")
        x1, x2 = self.mesh.coords[:, 0], self.mesh.coords[:, 1]
        with open(path, "w") as fh:
            fh.write("node,x1,x2,eta,u1,u2\n")
            for i in range(self.mesh.n_nodes):
                fh.write(f"{i},{float(x1[i])!r},{float(x2[i])!r},"
                         f"{float(state.eta[i])!r},{float(state.u1[i])!r},"
                         f"{float(state.u2[i])!r}\n")

    def gauges(self, state: State):
        for gid, fh in self._gauge_files.items():
            fh.write(f"{float(state.t)!r},{float(state.eta[gid])!r}\n")

    def log_step(self, k, t, mass, info: StepInfo):
        gate = ""
        if info.gate is not None and not info.gate.passed:
            gate = f" gate_violation tau_c={info.gate.min_tau_c!r}"
        self._log.write(f"step={k} t={t!r} mass={mass!r} "
                        f"cg_iterations={info.cg.iterations} "
                        f"cg_residual={info.cg.residual!r}{gate}\n")

    def close(self):
        for fh in self._gauge_files.values():
            fh.close()
        self._log.close()


def load_snapshot(path, n_nodes) -> State:
    """Read a snapshot CSV back into a State (restart path)."""
    eta = np.empty(n_nodes)
    u1 = np.empty(n_nodes)
    u2 = np.empty(n_nodes)
    seen = np.zeros(n_nodes, dtype=bool)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "node,x1,x2,eta,u1,u2":
            raise ValueError(f"{path}: not a snapshot file")
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"{path}: malformed snapshot row {line!r}")
            i = int(parts[0])
            if not (0 <= i < n_nodes):
                raise ValueError(f"{path}: node index {i} outside mesh")
            if seen[i]:
                raise ValueError(f"{path}: duplicate row for node {i}")
            eta[i] = float(parts[3])
            u1[i] = float(parts[4])
            u2[i] = float(parts[5])
            seen[i] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ValueError(f"{path}: no row for node {missing}")
    return State(eta, u1, u2).check()
