"""Live interactive simulation sessions.

A session owns one engine and advances it tick by tick, consuming shifter
clicks and control messages from a queue and emitting state/event frames
to registered listeners.  All engine access happens on the session's own
loop (or the caller's thread for the headless runner); listeners receive
plain dicts and must not block.

Client -> session messages:
    {"type": "shift_up"} | {"type": "shift_down"} | {"type": "pause"} |
    {"type": "resume"} | {"type": "reset"} |
    {"type": "set_profile", "amplitude_rad"?: float, "frequency_hz"?: float}
Session -> client frames:
    {"type": "state", t, theta, theta_dot, x, detent, k, tau, tension, mode}
    {"type": "event", t, kind, detent, x, theta, tension}
    {"type": "error", message}
"""

from __future__ import annotations

import math
import queue
import threading
import time

from .errors import ConfigError
from .motion import MotionProfile
from .sim import DOWN, UP, SimConfig, SimEngine, Trace, TraceSample

SHIFT_TYPES = {"shift_up": UP, "shift_down": DOWN}
CONTROL_TYPES = {"pause", "resume", "reset", "set_profile"}


def state_frame(sample: TraceSample) -> dict:
    return {
        "type": "state",
        "t": sample.t,
        "theta": sample.theta,
        "theta_dot": sample.theta_dot,
        "x": sample.x,
        "detent": sample.detent,
        "k": sample.k,
        "tau": sample.tau,
        "tension": sample.tension,
        "mode": sample.mode.value,
    }


def event_frame(event) -> dict:
    d = event.to_dict()
    d["type"] = "event"
    return d


def error_frame(message: str) -> dict:
    return {"type": "error", "message": message}


def rebased_profile(profile: MotionProfile, t: float, amplitude: float | None,
                    frequency_hz: float | None) -> MotionProfile:
    """New profile matching theta and its slope sign at time t, so live
    profile changes do not jump the joint."""
    amp = profile.theta_max if amplitude is None else float(amplitude)
    omega = profile.omega if frequency_hz is None else 2.0 * math.pi * float(frequency_hz)
    if amp < 0:
        raise ConfigError("amplitude_rad must be non-negative", field="amplitude_rad")
    if omega <= 0:
        raise ConfigError("frequency_hz must be positive", field="frequency_hz")
    theta_now = profile.theta(t)
    rising = profile.theta_dot(t) >= 0.0
    if amp == 0.0:
        return MotionProfile(theta_max=0.0, omega=omega, phase=0.0)
    c = max(-1.0, min(1.0, theta_now / amp))
    psi = math.asin(c)
    if not rising:
        psi = math.pi - psi
    return MotionProfile(theta_max=amp, omega=omega, phase=psi - omega * t)


class SimSession:
    """One live simulation behind a command queue and frame listeners."""

    def __init__(self, config: SimConfig, tick_hz: float = 50.0, speed: float = 1.0):
        steps = 1.0 / (tick_hz * config.dt)
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ConfigError(
                f"tick rate {tick_hz} Hz must divide the sample rate {1.0 / config.dt} Hz",
                field="tick_hz")
        self.steps_per_tick = int(round(steps))
        self.tick_hz = tick_hz
        self.speed = speed
        self.config = config
        self.engine = SimEngine(config)
        self.inbox: "queue.Queue[dict]" = queue.Queue()
        self.listeners: list = []
        self.paused = False
        self._events_sent = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._lock = threading.Lock()

    # -- wiring --

    def add_listener(self, fn) -> None:
        with self._lock:
            self.listeners.append(fn)

    def remove_listener(self, fn) -> None:
        with self._lock:
            if fn in self.listeners:
                self.listeners.remove(fn)

    def _emit(self, frame: dict) -> None:
        with self._lock:
            listeners = list(self.listeners)
        for fn in listeners:
            fn(frame)

    def submit(self, message: dict) -> None:
        """Queue a client message for the session loop."""
        self.inbox.put(message)

    @property
    def finished(self) -> bool:
        return self.engine.i_cur >= self.engine.n_steps

    # -- message handling (session loop only) --

    def _handle(self, msg) -> None:
        if not isinstance(msg, dict) or "type" not in msg:
            self._emit(error_frame("message must be an object with a 'type' key"))
            return
        mtype = msg["type"]
        if mtype in SHIFT_TYPES:
            if len(msg) != 1:
                self._emit(error_frame(f"{mtype} takes no extra keys"))
                return
            i = self.engine.i_cur
            self.engine.advance_to(i, {i: [SHIFT_TYPES[mtype]]})
            self._flush_events()
            self._emit(state_frame(self.engine.sample_now()))
        elif mtype == "pause":
            self.paused = True
            self._emit(state_frame(self.engine.sample_now()))
        elif mtype == "resume":
            self.paused = False
            self._emit(state_frame(self.engine.sample_now()))
        elif mtype == "reset":
            self.engine = SimEngine(self.config)
            self._events_sent = 0
            self.paused = False
            self.engine.advance_to(0)
            self._emit(state_frame(self.engine.sample_now()))
        elif mtype == "set_profile":
            extra = set(msg) - {"type", "amplitude_rad", "frequency_hz"}
            if extra:
                self._emit(error_frame(f"set_profile: unknown keys {sorted(extra)}"))
                return
            try:
                amp = msg.get("amplitude_rad")
                freq = msg.get("frequency_hz")
                if amp is not None and not isinstance(amp, (int, float)):
                    raise ConfigError("amplitude_rad must be a number")
                if freq is not None and not isinstance(freq, (int, float)):
                    raise ConfigError("frequency_hz must be a number")
                t_now = float(self.engine.t[self.engine.i_cur])
                self.engine.profile = rebased_profile(self.engine.profile, t_now,
                                                      amp, freq)
            except ConfigError as exc:
                self._emit(error_frame(str(exc)))
                return
            self._emit(state_frame(self.engine.sample_now()))
        else:
            self._emit(error_frame(f"unknown message type {mtype!r}"))

    def _flush_events(self) -> None:
        events = self.engine.events
        while self._events_sent < len(events):
            self._emit(event_frame(events[self._events_sent]))
            self._events_sent += 1

    def _drain_inbox(self) -> None:
        while True:
            try:
                msg = self.inbox.get_nowait()
            except queue.Empty:
                return
            self._handle(msg)

    # -- driving --

    def tick(self) -> None:
        """Consume pending messages, then advance one tick of sim time."""
        self._drain_inbox()
        if self.paused or self.finished:
            return
        target = min(self.engine.i_cur + self.steps_per_tick, self.engine.n_steps)
        self.engine.advance_to(target)
        self._flush_events()
        self._emit(state_frame(self.engine.sample_now()))

    def run_loop(self) -> None:
        """Paced loop: one tick of sim time per tick period of wall time."""
        self.engine.advance_to(0)
        self._emit(state_frame(self.engine.sample_now()))
        period = 1.0 / self.tick_hz
        next_wall = time.monotonic()
        while not self._stop.is_set():
            idle = self.paused or self.finished
            self.tick()
            if self.speed > 0:
                next_wall += period / self.speed
                delay = next_wall - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_wall = time.monotonic()
            elif idle:
                time.sleep(period)  # do not spin while holding
            if self.finished:
                # Hold at the end, still serving commands like pause/reset.
                self.paused = True

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self.run_loop, daemon=True,
                                        name="vssim-session")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None


def run_interactive(commands, config: SimConfig, tick_hz: float = 50.0) -> Trace:
    """Headless interactive run: deliver (sim_time, message) pairs as the
    simulation clock reaches them, mirroring live operation.

    Each message is consumed at the step boundary following its arrival,
    exactly as in batch simulation, so feeding the schedule's clicks at
    their scheduled instants reproduces `simulate` sample for sample.
    Returns the full-resolution trace.
    """
    session = SimSession(config, tick_hz=tick_hz, speed=0.0)
    pending = sorted(commands, key=lambda item: item[0])
    session.engine.advance_to(0)
    j = 0
    dt = session.engine.dt
    n = session.engine.n_steps
    while True:
        engine = session.engine  # reset may have swapped it
        if session.paused:
            # Sim time is frozen; deliver the next message (wall time still
            # flows for a live operator) or end the run if nothing remains.
            if j >= len(pending):
                break
            session.submit(pending[j][1])
            j += 1
            session._drain_inbox()
            continue
        if engine.i_cur >= n:
            break
        target = min(engine.i_cur + session.steps_per_tick, n)
        if j < len(pending):
            b = max(engine.i_cur, int(math.ceil(pending[j][0] / dt - 1e-9)))
            if b <= target:
                engine.advance_to(b)
                session.submit(pending[j][1])
                j += 1
                session._drain_inbox()
                session._flush_events()
                continue
        engine.advance_to(target)
        session._flush_events()
    return session.engine.trace_view()
