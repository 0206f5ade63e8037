"""Deterministic fixed-step simulation of the joint under prescribed motion.

The engine advances mixed continuous/discrete dynamics on a fixed sample
grid.  Shifter commands are consumed at the step boundary following their
arrival; all other discrete transitions (detent crossings, pawl flips,
travel-stop contacts) are localized in time by bisection on their
triggering inequality, so event timestamps are insensitive to the step
size.  Identical configurations reproduce bit-identical traces.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .mechanism import MechanismParams
from .motion import MotionProfile, prescribed_theta
from .ratchet import (
    PAWL_DISENGAGE,
    REFUSED_CLICK,
    SHIFT_DOWN,
    SHIFT_UP,
    Event,
    PawlMode,
    PivotState,
    _PivotVars,
    cable_command,
    cable_tension,
    disengaged_step,
    engaged_advance,
    initial_pivot_state,
    pawl_transition,
)

UP = "up"
DOWN = "down"

TRACE_COLUMNS = ["t", "theta", "theta_dot", "x", "detent", "k", "tau",
                 "tension", "mode", "event"]


@dataclass(frozen=True)
class ShiftCommand:
    """A timed shifter click."""

    t: float
    direction: str  # UP or DOWN

    def __post_init__(self):
        if self.t < 0:
            raise ConfigError(f"command time must be non-negative, got {self.t}", field="schedule")
        if self.direction not in (UP, DOWN):
            raise ConfigError(f"direction must be '{UP}' or '{DOWN}', got {self.direction!r}",
                              field="schedule")


@dataclass(frozen=True)
class SimConfig:
    params: MechanismParams
    profile: MotionProfile
    schedule: tuple[ShiftCommand, ...] = ()
    dt: float = 0.001
    duration: float = 60.0
    initial_index: int = 1
    seed: int = 0  # reserved; the default dynamics are noise-free

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.005):
            raise ConfigError(f"dt must lie in (0, 0.005] s, got {self.dt}", field="dt")
        if self.duration <= 0:
            raise ConfigError(f"duration must be positive, got {self.duration}", field="duration")
        if not (1 <= self.initial_index <= self.params.n_detents):
            raise ConfigError(
                f"initial_index {self.initial_index} outside 1..{self.params.n_detents}",
                field="initial_index")
        object.__setattr__(self, "schedule", tuple(self.schedule))
        times = [c.t for c in self.schedule]
        if times != sorted(times):
            raise ConfigError("schedule must be sorted by time", field="schedule")


def replication_config(params: MechanismParams | None = None, *, dt: float = 0.001,
                       duration: float = 60.0) -> SimConfig:
    """Built-in leg-swing scenario: +/-20 deg at 0.8 Hz, shift up through all
    ten detents and back down, one click per 1.5 s."""
    params = params or MechanismParams()
    profile = MotionProfile(theta_max=math.radians(20.0), omega=2.0 * math.pi * 0.8)
    ups = [ShiftCommand(2.0 + 1.5 * i, UP) for i in range(10)]
    downs = [ShiftCommand(20.0 + 1.5 * i, DOWN) for i in range(10)]
    return SimConfig(params=params, profile=profile, schedule=tuple(ups + downs),
                     dt=dt, duration=duration, initial_index=1)


@dataclass(frozen=True)
class TraceSample:
    t: float
    theta: float
    theta_dot: float
    x: float
    detent: int
    k: float
    tau: float
    tension: float
    mode: PawlMode
    events: tuple[Event, ...] = ()


class Trace:
    """Column-oriented record of one simulation run plus its event log."""

    def __init__(self, t, theta, theta_dot, x, detent, k, tau, tension, mode,
                 events: list[Event], config: SimConfig | None = None):
        self.t = t
        self.theta = theta
        self.theta_dot = theta_dot
        self.x = x
        self.detent = detent
        self.k = k
        self.tau = tau
        self.tension = tension
        self.mode = mode  # uint8: 1 ENGAGED, 0 DISENGAGED
        self.events = events
        self.config = config

    def __len__(self):
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def sample(self, i: int) -> TraceSample:
        lo = self.t[i - 1] if i > 0 else -math.inf
        evs = tuple(e for e in self.events if lo < e.t <= self.t[i])
        return TraceSample(
            t=float(self.t[i]), theta=float(self.theta[i]),
            theta_dot=float(self.theta_dot[i]), x=float(self.x[i]),
            detent=int(self.detent[i]), k=float(self.k[i]),
            tau=float(self.tau[i]), tension=float(self.tension[i]),
            mode=PawlMode.ENGAGED if self.mode[i] else PawlMode.DISENGAGED,
            events=evs,
        )

    def event_kinds_per_sample(self) -> list[str]:
        """Semicolon-joined event kinds attributed to each sample row.

        An event at time te lands on the first row with t >= te.
        """
        out = [""] * len(self.t)
        if not self.events:
            return out
        t = self.t
        n = len(t)
        for e in sorted(self.events, key=lambda e: e.t):
            i = int(np.searchsorted(t, e.t - 1e-12, side="left"))
            if i >= n:
                i = n - 1
            out[i] = e.kind if not out[i] else out[i] + ";" + e.kind
        return out

    def downsample(self, step: int) -> "Trace":
        """Every step-th row, events carried along unchanged."""
        sl = slice(0, len(self.t), step)
        return Trace(self.t[sl], self.theta[sl], self.theta_dot[sl], self.x[sl],
                     self.detent[sl], self.k[sl], self.tau[sl], self.tension[sl],
                     self.mode[sl], list(self.events), self.config)

    # ---- serialization ----

    def to_csv(self, meta: dict | None = None) -> str:
        buf = io.StringIO()
        if meta:
            for key, value in meta.items():
                buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        kinds = self.event_kinds_per_sample()
        mode_names = np.where(self.mode.astype(bool), PawlMode.ENGAGED.value,
                              PawlMode.DISENGAGED.value)
        for i in range(len(self.t)):
            writer.writerow([
                repr(float(self.t[i])), repr(float(self.theta[i])),
                repr(float(self.theta_dot[i])), repr(float(self.x[i])),
                int(self.detent[i]), repr(float(self.k[i])),
                repr(float(self.tau[i])), repr(float(self.tension[i])),
                mode_names[i], kinds[i],
            ])
        return buf.getvalue()

    def write_csv(self, path: str | Path, meta: dict | None = None) -> None:
        Path(path).write_text(self.to_csv(meta), encoding="utf-8")

    def events_to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict()) + "\n" for e in self.events)

    def write_events_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.events_to_jsonl(), encoding="utf-8")

    @classmethod
    def from_csv(cls, path: str | Path, events_path: str | Path | None = None,
                 config: SimConfig | None = None) -> "Trace":
        rows = []
        with open(path, newline="", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
            else:
                raise ConfigError(f"{path}: no CSV header found")
            header = next(csv.reader([line]))
            if header != TRACE_COLUMNS:
                raise ConfigError(f"{path}: unexpected columns {header}")
            for row in csv.reader(f):
                rows.append(row)
        n = len(rows)
        t = np.empty(n)
        theta = np.empty(n)
        theta_dot = np.empty(n)
        x = np.empty(n)
        detent = np.empty(n, dtype=np.int32)
        k = np.empty(n)
        tau = np.empty(n)
        tension = np.empty(n)
        mode = np.empty(n, dtype=np.uint8)
        pseudo_events: list[Event] = []
        for i, row in enumerate(rows):
            t[i] = float(row[0])
            theta[i] = float(row[1])
            theta_dot[i] = float(row[2])
            x[i] = float(row[3])
            detent[i] = int(row[4])
            k[i] = float(row[5])
            tau[i] = float(row[6])
            tension[i] = float(row[7])
            mode[i] = 1 if row[8] == PawlMode.ENGAGED.value else 0
            if row[9]:
                for kind in row[9].split(";"):
                    pseudo_events.append(Event(t[i], kind, int(detent[i]),
                                               float(x[i]), float(theta[i]),
                                               float(tension[i])))
        events = pseudo_events
        if events_path is not None:
            events = load_events_jsonl(events_path)
        return cls(t, theta, theta_dot, x, detent, k, tau, tension, mode,
                   events, config)


def load_events_jsonl(path: str | Path) -> list[Event]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        events.append(Event(d["t"], d["kind"], d["detent"], d["x"], d["theta"],
                            d["tension"]))
    return events


class SimEngine:
    """Owns the single authoritative pivot state and the trace being built.

    `simulate` drives it straight through a schedule; a live session
    drives it tick by tick, injecting commands at step boundaries.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        p = config.params
        self.params = p
        self.profile = config.profile
        self.n_steps = int(round(config.duration / config.dt))
        if self.n_steps < 1:
            raise ConfigError("duration shorter than one step", field="duration")
        self.dt = config.dt
        n = self.n_steps + 1
        self.t = np.arange(n) * config.dt
        self._theta = np.empty(n)
        self._theta_dot = np.empty(n)
        self._x = np.empty(n)
        self._detent = np.empty(n, dtype=np.int32)
        self._k = np.empty(n)
        self._tau = np.empty(n)
        self._tension = np.empty(n)
        self._mode = np.empty(n, dtype=np.uint8)
        self.events: list[Event] = []
        self.pv = _PivotVars(p, initial_pivot_state(p, config.initial_index))
        self.i_cur = 0  # last sample index already recorded
        self._started = False

    # -- state snapshots --

    def state(self) -> PivotState:
        return self.pv.freeze(self.params)

    def sample_now(self) -> TraceSample:
        return self.trace_view().sample(self.i_cur)

    def trace_view(self) -> Trace:
        sl = slice(0, self.i_cur + 1)
        return Trace(self.t[sl], self._theta[sl], self._theta_dot[sl],
                     self._x[sl], self._detent[sl], self._k[sl], self._tau[sl],
                     self._tension[sl], self._mode[sl], list(self.events),
                     self.config)

    # -- internals --

    def _stiffness_of(self, x: float) -> float:
        ratio = x / (self.params.span - x)
        return self.params.k_S * ratio * ratio

    def _record_scalar(self, i: int) -> None:
        t = self.t[i]
        theta, theta_dot = prescribed_theta(self.profile, t)
        pv = self.pv
        k = self._stiffness_of(pv.x)
        self._theta[i] = theta
        self._theta_dot[i] = theta_dot
        self._x[i] = pv.x
        self._detent[i] = pv.detent
        self._k[i] = k
        self._tau[i] = k * theta
        self._tension[i] = cable_tension(self.params, pv.u, pv.x)
        self._mode[i] = 1 if pv.mode is PawlMode.ENGAGED else 0

    def _fill_span(self, i_from: int, i_to: int) -> None:
        """Vector-fill samples (i_from, i_to] from the frozen engaged state."""
        if i_to <= i_from:
            return
        sl = slice(i_from + 1, i_to + 1)
        ts = self.t[sl]
        pr = self.profile
        theta = pr.theta_max * np.sin(pr.omega * ts + pr.phase)
        self._theta[sl] = theta
        self._theta_dot[sl] = pr.theta_max * pr.omega * np.cos(pr.omega * ts + pr.phase)
        pv = self.pv
        k = self._stiffness_of(pv.x)
        self._x[sl] = pv.x
        self._detent[sl] = pv.detent
        self._k[sl] = k
        self._tau[sl] = k * theta
        self._tension[sl] = cable_tension(self.params, pv.u, pv.x)
        self._mode[sl] = 1 if pv.mode is PawlMode.ENGAGED else 0

    def _index_at_or_after(self, t: float) -> int:
        return int(np.searchsorted(self.t, t - 1e-12, side="left"))

    def _apply_command(self, direction: str, t: float) -> None:
        pv = self.pv
        theta = self.profile.theta(t)
        if direction == UP:
            if pv.shifter_index >= self.params.n_detents:
                self.events.append(Event(t, REFUSED_CLICK, pv.detent, pv.x, theta,
                                         cable_tension(self.params, pv.u, pv.x)))
                return
            pv.shifter_index += 1
            kind = SHIFT_UP
        else:
            if pv.shifter_index <= 1:
                self.events.append(Event(t, REFUSED_CLICK, pv.detent, pv.x, theta,
                                         cable_tension(self.params, pv.u, pv.x)))
                return
            pv.shifter_index -= 1
            kind = SHIFT_DOWN
        pv.u = cable_command(self.params, pv.shifter_index)
        f_s = cable_tension(self.params, pv.u, pv.x)
        self.events.append(Event(t, kind, pv.detent, pv.x, theta, f_s))
        new_mode = pawl_transition(pv.mode, f_s, self.params)
        if new_mode is not pv.mode:
            if new_mode is PawlMode.ENGAGED:
                from .ratchet import _engage_at
                _engage_at(self.params, self.profile, pv, t, self.events)
            else:
                pv.mode = PawlMode.DISENGAGED
                pv.v = 0.0
                self.events.append(Event(t, PAWL_DISENGAGE, pv.detent, pv.x,
                                         theta, f_s))

    def _advance_dynamics(self, i_from: int, i_to: int) -> None:
        """March the hybrid state from t[i_from] to t[i_to], recording
        samples (i_from, i_to]."""
        pv = self.pv
        i = i_from
        while i < i_to:
            if pv.mode is PawlMode.ENGAGED:
                n_before = len(self.events)
                engaged_advance(self.params, self.profile, pv, self.t[i],
                                self.t[i_to], self.events)
                advances = self.events[n_before:]
                if advances:
                    # Fill piecewise so each sample sees the detent that was
                    # latched at its own time.
                    pos = pv.positions
                    final_detent, final_x = pv.detent, pv.x
                    first_detent = final_detent - len(advances)
                    cur = i
                    for j, e in enumerate(advances):
                        idx = min(self._index_at_or_after(e.t), i_to)
                        if idx - 1 > cur:
                            pv.detent = first_detent + j
                            pv.x = pos[pv.detent - 1]
                            self._fill_span(cur, idx - 1)
                            cur = idx - 1
                    pv.detent, pv.x = final_detent, final_x
                    self._fill_span(cur, i_to)
                else:
                    self._fill_span(i, i_to)
                i = i_to
            else:
                t_eng = disengaged_step(self.params, self.profile, pv,
                                        self.t[i], self.t[i + 1], self.events)
                if t_eng is not None:
                    engaged_advance(self.params, self.profile, pv, t_eng,
                                    self.t[i + 1], self.events)
                self._record_scalar(i + 1)
                i += 1

    def _start(self) -> None:
        if not self._started:
            self._record_scalar(0)
            self._started = True

    def advance_to(self, i_target: int,
                   commands: dict[int, list[str]] | None = None) -> None:
        """Advance the grid index to i_target, applying per-boundary commands.

        commands maps a boundary index to the click directions consumed
        there (in arrival order).
        """
        self._start()
        if i_target > self.n_steps:
            raise DomainError(f"target index {i_target} beyond run end {self.n_steps}")
        commands = commands or {}
        boundaries = sorted(b for b in commands if self.i_cur <= b <= i_target)
        i = self.i_cur
        for b in boundaries:
            if b > i:
                self._advance_dynamics(i, b)
                i = b
            t_b = self.t[b]
            for direction in commands[b]:
                self._apply_command(direction, t_b)
            if self.pv.mode is PawlMode.ENGAGED:
                # Fire any crossings that are feasible right at the boundary.
                engaged_advance(self.params, self.profile, self.pv, t_b, t_b,
                                self.events)
            self._record_scalar(b)  # boundary sample reflects the commands
        if i_target > i:
            self._advance_dynamics(i, i_target)
            i = i_target
        self.i_cur = i

    def finish(self) -> Trace:
        self.advance_to(self.n_steps)
        return self.trace_view()


def command_boundaries(schedule, dt: float, n_steps: int) -> dict[int, list[str]]:
    """Map each command to the step boundary where it is consumed."""
    out: dict[int, list[str]] = {}
    for cmd in schedule:
        b = int(math.ceil(cmd.t / dt - 1e-9))
        if b > n_steps:
            continue  # command falls after the run ends
        out.setdefault(b, []).append(cmd.direction)
    return out


def simulate(config: SimConfig) -> Trace:
    """Run the full fixed-step simulation of a configuration."""
    engine = SimEngine(config)
    cmds = command_boundaries(config.schedule, engine.dt, engine.n_steps)
    engine.advance_to(engine.n_steps, cmds)
    return engine.trace_view()
