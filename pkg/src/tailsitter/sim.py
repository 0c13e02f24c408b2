"""Closed-loop scenarios, logging and region-of-attraction sampling."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from tailsitter import flight_ctl, hover_ctl
from tailsitter.equilibria import hover_equilibrium, linearize_analytic_hover, trim_level_flight
from tailsitter.hybrid import (
    Controllers,
    HybridState,
    JumpRecord,
    Mode,
    SupervisorConfig,
    hybrid_step,
    initial_state,
)
from tailsitter.lqr import LqrHover, LqrWeights, hover_lqr
from tailsitter.mathkin import normalize
from tailsitter.plant import NonFinite, actuate, rk4_step
from tailsitter.vehicle import ActuatorLimits, VehicleParams, pack_state, virtual_from_effective

CONTROLLERS = ("nl_hover", "lqr", "lqr_int", "flight", "hybrid")
LOG_COLUMNS = (
    "t", "j", "mode",
    "p_x", "p_y", "p_z", "v_x", "v_y", "v_z",
    "q_0", "q_1", "q_2", "q_3", "w_x", "w_y", "w_z",
    "u_1", "u_2", "u_3", "u_4",
    "omega_1", "omega_2", "delta_1", "delta_2",
    "V", "kappa", "saturated",
)
_NUMERIC = [c for c in LOG_COLUMNS if c != "mode"]
DEFAULT_LQR_SCALE = 10.0


# ---------------------------------------------------------------------------
# Scenario


@dataclass(frozen=True)
class Scenario:
    """A closed-loop experiment.

    ``targets`` and ``wind`` are time-sorted ``(t_switch, vec3)`` schedules;
    the entry with the largest ``t_switch <= t`` is active.
    """

    name: str
    x0: np.ndarray
    targets: tuple[tuple[float, np.ndarray], ...]
    controller: str = "nl_hover"
    wind: tuple[tuple[float, np.ndarray], ...] = ()
    dt: float = 1e-3
    t_end: float = 20.0
    hover_gains: hover_ctl.HoverGains = field(default_factory=hover_ctl.HoverGains)
    flight_gains: flight_ctl.FlightGains = field(default_factory=flight_ctl.FlightGains)
    supervisor: SupervisorConfig = field(default_factory=SupervisorConfig)
    lqr_scale: float = DEFAULT_LQR_SCALE
    v_cruise: float = 20.0

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}")
        if not self.targets:
            raise ValueError("at least one target is required")
        for sched in (self.targets, self.wind):
            times = [s[0] for s in sched]
            if times != sorted(times):
                raise ValueError("schedules must be time-sorted")

    def target_at(self, t: float) -> np.ndarray:
        return _schedule_at(self.targets, t)

    def wind_at(self, t: float) -> np.ndarray | None:
        if not self.wind:
            return None
        return _schedule_at(self.wind, t)

    def settings(self) -> dict:
        """All resolved settings, defaults included, as plain data."""
        def plain(obj):
            d = asdict(obj)
            return {k: (list(np.atleast_1d(v).tolist()) if isinstance(v, (tuple, np.ndarray)) else v)
                    for k, v in d.items()}
        return {
            "name": self.name,
            "controller": self.controller,
            "dt": self.dt,
            "t_end": self.t_end,
            "x0": self.x0.tolist(),
            "targets": [[t, p.tolist()] for t, p in self.targets],
            "wind": [[t, w.tolist()] for t, w in self.wind],
            "hover_gains": plain(self.hover_gains),
            "flight_gains": plain(self.flight_gains),
            "supervisor": asdict(self.supervisor),
            "lqr_scale": self.lqr_scale,
            "v_cruise": self.v_cruise,
        }


def _schedule_at(sched, t: float) -> np.ndarray:
    active = sched[0][1]
    for ts, value in sched:
        if ts <= t + 1e-12:
            active = value
        else:
            break
    return active


def _initial_state(spec: dict, params: VehicleParams) -> np.ndarray:
    spec = spec or {}
    if "trim" in spec:
        x = trim_level_flight(params, float(spec["trim"])).x_eq.copy()
        if "p" in spec:
            x[0:3] = spec["p"]
        return x
    q = spec.get("q", "hover")
    q = hover_equilibrium(params).x_eq[6:10] if q == "hover" else normalize(np.asarray(q, float))
    return pack_state(spec.get("p", [0, 0, 0]), spec.get("v", [0, 0, 0]), q,
                      spec.get("omega", [0, 0, 0]))


def scenario_from_dict(data: dict, params: VehicleParams | None = None) -> Scenario:
    """Build a :class:`Scenario` from parsed YAML."""
    params = VehicleParams() if params is None else params
    known = {"name", "controller", "dt", "t_end", "initial", "targets", "wind", "gains"}
    unknown = set(data) - known
    if unknown:
        raise KeyError(f"unknown scenario keys {sorted(unknown)}")
    gains = dict(data.get("gains") or {})
    extra = set(gains) - {"hover", "flight", "supervisor", "lqr_scale", "v_cruise"}
    if extra:
        raise KeyError(f"unknown gain groups {sorted(extra)}")
    hover = dict(gains.get("hover") or {})
    for key in ("k_R", "k_omega"):
        if isinstance(hover.get(key), list):
            hover[key] = tuple(hover[key])
    flight = dict(gains.get("flight") or {})
    for key in ("k_c", "k_d"):
        if isinstance(flight.get(key), list):
            flight[key] = tuple(flight[key])
    return Scenario(
        name=str(data.get("name", "scenario")),
        x0=_initial_state(data.get("initial"), params),
        targets=tuple((float(t), np.asarray(p, float)) for t, p in data["targets"]),
        controller=data.get("controller", "nl_hover"),
        wind=tuple((float(t), np.asarray(w, float)) for t, w in data.get("wind") or ()),
        dt=float(data.get("dt", 1e-3)),
        t_end=float(data.get("t_end", 20.0)),
        hover_gains=hover_ctl.HoverGains(**hover),
        flight_gains=flight_ctl.FlightGains(**flight),
        supervisor=SupervisorConfig(**(gains.get("supervisor") or {})),
        lqr_scale=float(gains.get("lqr_scale", DEFAULT_LQR_SCALE)),
        v_cruise=float(gains.get("v_cruise", 20.0)),
    )


def bundled_scenarios() -> list[str]:
    root = resources.files("tailsitter.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(name_or_path: str | Path, params: VehicleParams | None = None) -> Scenario:
    """Load a scenario file, or a bundled scenario by name."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") and path.exists():
        text = path.read_text()
    else:
        text = resources.files("tailsitter.scenarios").joinpath(f"{name_or_path}.yaml").read_text()
    return scenario_from_dict(yaml.safe_load(text), params)


# ---------------------------------------------------------------------------
# Logging


@dataclass(frozen=True)
class LogRecord:
    t: float
    j: int
    mode: str
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    u: np.ndarray
    physical: np.ndarray
    V: float
    kappa: float
    saturated: bool


@dataclass
class SimLog:
    """Column-oriented log: one row per step, plus jump records."""

    data: np.ndarray
    modes: list[str]
    jumps: list[JumpRecord]
    settings: dict

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, _NUMERIC.index(name)]

    def columns(self, *names: str) -> np.ndarray:
        return self.data[:, [_NUMERIC.index(n) for n in names]]

    def record(self, i: int) -> LogRecord:
        r = self.data[i]
        c = {n: r[k] for k, n in enumerate(_NUMERIC)}
        return LogRecord(
            c["t"], int(c["j"]), self.modes[i],
            self.columns("p_x", "p_y", "p_z")[i], self.columns("v_x", "v_y", "v_z")[i],
            self.columns("q_0", "q_1", "q_2", "q_3")[i], self.columns("w_x", "w_y", "w_z")[i],
            self.columns("u_1", "u_2", "u_3", "u_4")[i],
            self.columns("omega_1", "omega_2", "delta_1", "delta_2")[i],
            c["V"], c["kappa"], bool(c["saturated"]),
        )

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def p(self) -> np.ndarray:
        return self.columns("p_x", "p_y", "p_z")

    @property
    def v(self) -> np.ndarray:
        return self.columns("v_x", "v_y", "v_z")

    @property
    def q(self) -> np.ndarray:
        return self.columns("q_0", "q_1", "q_2", "q_3")

    @property
    def physical(self) -> np.ndarray:
        return self.columns("omega_1", "omega_2", "delta_1", "delta_2")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(log: SimLog, path: str | Path) -> None:
    """Header row then one record per step; floats in round-trip repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(LOG_COLUMNS)
    mode_at = LOG_COLUMNS.index("mode")
    for row, mode in zip(log.data, log.modes):
        cells = [_fmt(x) for x in row]
        cells[1] = str(int(row[1]))
        cells[-1] = str(int(row[-1]))
        cells.insert(mode_at, mode)
        w.writerow(cells)
    Path(path).write_text(buf.getvalue(), newline="")


def write_jumps_csv(log: SimLog, path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(("t", "j", "from_mode", "to_mode", "V"))
    for r in log.jumps:
        w.writerow((_fmt(r.t), r.j, r.from_mode.value, r.to_mode.value, _fmt(r.V)))
    Path(path).write_text(buf.getvalue(), newline="")


def write_settings(log: SimLog, path: str | Path) -> None:
    Path(path).write_text(json.dumps(log.settings, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Running


def design_hover_lqr(params: VehicleParams, scale: float = DEFAULT_LQR_SCALE,
                     integrator: bool = False) -> LqrHover:
    """Hover LQR with ``Q = scale I`` and ``R = scale I``."""
    lm = linearize_analytic_hover(params)
    eq = lm.equilibrium
    n = 15 if integrator else 12
    return hover_lqr(lm.A, lm.B, eq.x_eq, eq.u_eq,
                     LqrWeights(scale * np.eye(n), scale * np.eye(4)), integrator)


_MODE_OF = {"nl_hover": Mode.NL_HOVER, "lqr": Mode.LIN_HOVER, "flight": Mode.FLIGHT}


def run_scenario(
    s: Scenario, params: VehicleParams, limits: ActuatorLimits | None = None
) -> SimLog:
    """Simulate a scenario with RK4 at ``s.dt``.

    The controller runs at every step and its command passes through the
    actuator layer before being held over the step.

    Raises
    ------
    NonFinite
        With the simulation time added to the message.
    """
    limits = ActuatorLimits() if limits is None else limits
    lqr = design_hover_lqr(params, s.lqr_scale, integrator=s.controller == "lqr_int")
    n = int(round(s.t_end / s.dt))
    rows = np.empty((n + 1, len(_NUMERIC)))
    modes: list[str] = []
    jumps: list[JumpRecord] = []
    settings = s.settings()

    hybrid = s.controller == "hybrid"
    first_mode = Mode.NL_HOVER if hybrid else _MODE_OF.get(s.controller, Mode.LIN_HOVER)
    ctrl = Controllers(lqr, s.hover_gains, s.flight_gains, s.v_cruise)
    st = initial_state(s.x0, first_mode, params)
    if first_mode is Mode.FLIGHT:
        st = _bumpless_flight(st, s, params)
    alloc = hover_ctl.allocation(params)
    xi = np.zeros(3)

    def log_row(i, state, info_u, info_phys, V, kappa, sat):
        x = state.x
        rows[i] = (state.time.t, state.time.j, *x, *info_u, *info_phys, V, kappa, float(sat))
        modes.append(state.mode.value)

    target = s.target_at(0.0)
    u0 = st.u if st.u is not None else lqr.u_eq
    log_row(0, st, u0, np.full(4, np.nan) if st.phys is None else st.phys,
            lqr.value(st.x, target), np.nan, False)
    for i in range(1, n + 1):
        t = st.time.t
        target = s.target_at(t)
        wind = s.wind_at(t)
        try:
            if s.controller == "lqr_int":
                u = lqr.command(st.x, target, xi)
                phys, u_app, sat = actuate(u, st.phys, s.dt, params, limits)
                xi = xi + s.dt * (target - st.x[0:3])
                x_new = rk4_step(st.x, u_app, s.dt, params, wind)
                st = HybridState(x_new, st.mode, st.time.flow(s.dt), st.hover, st.flight, phys, u_app)
                V, kappa = lqr.value(x_new, target), np.nan
            else:
                st, rec, info = hybrid_step(st, target, s.dt, s.supervisor, ctrl, params, limits, wind,
                                             alloc, supervise=hybrid)
                u_app, phys, V, kappa, sat = info.u, info.phys, info.V, info.kappa, info.saturated
                if rec is not None:
                    jumps.append(rec)
        except NonFinite as exc:
            raise NonFinite(f"t = {t:.3f} s: {exc}") from exc
        except flight_ctl.DegenerateGeometry as exc:
            raise flight_ctl.DegenerateGeometry(f"t = {t:.3f} s: {exc}") from exc
        log_row(i, st, u_app, phys, V, kappa, sat)
    return SimLog(rows, modes, jumps, settings)


def _bumpless_flight(st: HybridState, s: Scenario, params: VehicleParams) -> HybridState:
    """Start the flight loop holding the trim command of the initial speed."""
    speed = float(np.linalg.norm(st.x[3:6]))
    eq = trim_level_flight(params, speed)
    up = virtual_from_effective(eq.u_eq)
    ctl = flight_ctl.FlightCtlState(up[1:].copy(), up[0] / s.flight_gains.k_i, None, 0.0, 1.0)
    return HybridState(st.x, st.mode, st.time, st.hover, ctl, None, eq.u_eq)


# ---------------------------------------------------------------------------
# Reports


def mean_transit_speed(log: SimLog, target: np.ndarray, arrive_radius: float = 0.5) -> float:
    """Mean ground speed from the start until first arrival within ``arrive_radius``."""
    err = np.linalg.norm(log.p - np.asarray(target), axis=1)
    inside = np.flatnonzero(err < arrive_radius)
    end = inside[0] + 1 if inside.size else len(log)
    return float(np.mean(np.linalg.norm(log.v[:end], axis=1)))


def arrival_time(log: SimLog, target: np.ndarray, radius: float) -> float | None:
    err = np.linalg.norm(log.p - np.asarray(target), axis=1)
    inside = np.flatnonzero(err < radius)
    return float(log.t[inside[0]]) if inside.size else None


def energy_contrast(hover_log: SimLog, hover_target, flight_log: SimLog, flight_target) -> dict:
    """Mean transit speeds of a hover and a flight displacement."""
    hv = mean_transit_speed(hover_log, hover_target)
    fv = mean_transit_speed(flight_log, flight_target)
    return {"hover_mean_speed": hv, "flight_mean_speed": fv, "ratio": fv / hv}


def format_contrast(report: dict) -> str:
    return (f"hover transit {report['hover_mean_speed']:.2f} m/s, "
            f"flight transit {report['flight_mean_speed']:.2f} m/s, "
            f"ratio {report['ratio']:.1f}")


# ---------------------------------------------------------------------------
# Region of attraction


DEFAULT_SCALES = np.array([2.0, 2.0, 2.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.2, 1.0, 1.0, 1.0])


@dataclass(frozen=True)
class RoaSample:
    delta_x: np.ndarray
    V0: float
    converged: bool


@dataclass(frozen=True)
class RoaEstimate:
    samples: tuple[RoaSample, ...]
    c_star: float


def state_from_deviation(lqr: LqrHover, dx: np.ndarray) -> np.ndarray:
    """Full state at the hover equilibrium displaced by a 12-state deviation."""
    x = lqr.x_eq.copy()
    x[0:6] += dx[0:6]
    eps = lqr.x_eq[7:10] + dx[6:9]
    n = eps @ eps
    if n >= 1.0:
        eps = eps / np.sqrt(n) * (1 - 1e-9)
        n = eps @ eps
    x[6:10] = np.concatenate(([np.sqrt(1.0 - n)], eps))
    x[10:13] += dx[9:12]
    return x


def simulate_lqr_sample(
    lqr: LqrHover,
    params: VehicleParams,
    dx: np.ndarray,
    t_end: float = 15.0,
    dt: float = 1e-3,
    pos_tol: float = 0.1,
    rate_tol: float = 0.05,
    transient: float = 1.0,
    escape: float = 50.0,
) -> bool:
    """Closed-loop LQR run from ``dx``; True if it converges monotonically.

    Convergence requires ``V`` non-increasing after ``transient`` seconds
    and, at ``t_end``, position error below ``pos_tol`` and body rate below
    ``rate_tol``.
    """
    limits = ActuatorLimits()
    target = np.zeros(3)
    x = state_from_deviation(lqr, dx)
    phys = None
    V_prev = np.inf
    for k in range(int(round(t_end / dt))):
        u = lqr.command(x, target)
        phys, u_app, _ = actuate(u, phys, dt, params, limits)
        try:
            x = rk4_step(x, u_app, dt, params)
        except NonFinite:
            return False
        if np.linalg.norm(x[0:3]) > escape:
            return False
        if (k + 1) * dt > transient:
            V = lqr.value(x, target)
            if V > V_prev * (1 + 1e-9) + 1e-12:
                return False
            V_prev = V
    return bool(np.linalg.norm(x[0:3]) < pos_tol and np.linalg.norm(x[10:13]) < rate_tol)


def sample_deviations(n: int, radii, seed: int, scales: np.ndarray = DEFAULT_SCALES) -> np.ndarray:
    """Deviations on scaled spheres; sample ``i`` uses ``radii[i % len(radii)]``."""
    rng = np.random.default_rng(seed)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    d = rng.normal(size=(n, scales.size))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * scales * radii[np.arange(n) % radii.size][:, None]


def _roa_worker(args):
    lqr, params, dx, t_end, dt = args
    return simulate_lqr_sample(lqr, params, dx, t_end, dt)


def estimate_roa(
    lqr: LqrHover,
    params: VehicleParams,
    n_samples: int,
    radii=(0.25, 0.5, 1.0, 2.0),
    seed: int = 0,
    t_end: float = 15.0,
    dt: float = 1e-3,
    workers: int = 1,
    deviations: np.ndarray | None = None,
) -> RoaEstimate:
    """Sampled region-of-attraction level for the hover LQR loop.

    ``c_star`` is the smallest initial ``V`` among non-converged samples, or
    the largest sampled ``V`` when every sample converged.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    dxs = sample_deviations(n_samples, radii, seed) if deviations is None else np.asarray(deviations)
    jobs = [(lqr, params, dx, t_end, dt) for dx in dxs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flags = list(pool.map(_roa_worker, jobs))
    else:
        flags = [_roa_worker(j) for j in jobs]
    S = lqr.design.S[:12, :12]
    samples = tuple(RoaSample(dx, float(dx @ S @ dx), ok) for dx, ok in zip(dxs, flags))
    bad = [s.V0 for s in samples if not s.converged]
    c_star = min(bad) if bad else max(s.V0 for s in samples)
    return RoaEstimate(samples, float(c_star))
