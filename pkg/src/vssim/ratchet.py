"""Self-locking pivot mechanism: cable, series spring, pawl, and ratchet.

State machine summary:

* ENGAGED: the pawl seats the pivot exactly at a detent face.  The pivot
  can only move up the rack (toward higher stiffness), and only when the
  series-spring tension evaluated at the next face exceeds the spring
  reaction force there plus the detent holding threshold f0.  Crossings
  are localized in time by bisection on that inequality.
* DISENGAGED: the pawl is lifted; the pivot obeys
  m*x'' = f_s - F(theta, x) - c*x' and may travel down the rack.  When the
  tension re-crosses the engage threshold the pawl catches the nearest
  face within one tooth clearance below the pivot and seats there.

Engage/disengage follow a tension hysteresis band, standing in for the
interplay of the series spring preload and the pawl-return spring.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError, IntegrationError
from .mechanism import (
    MechanismParams,
    detent_position,
    detent_positions,
    stiffness_derivative,
)
from .motion import ConstantMotion

# Integration substep target for the free (disengaged) pivot, seconds.
# Chosen so the series-spring/pivot-mass oscillator is well resolved and
# so runs at dt and dt/2 share the same absolute substep grid.
SUBSTEP = 2.5e-4

# Event kinds.
DETENT_ADVANCE = "DETENT_ADVANCE"
DETENT_DROP = "DETENT_DROP"
PAWL_ENGAGE = "PAWL_ENGAGE"
PAWL_DISENGAGE = "PAWL_DISENGAGE"
LIMIT = "LIMIT"
REFUSED_CLICK = "REFUSED_CLICK"
# Accepted shifter clicks are recorded too, so a trace file alone suffices
# to recover per-command shift latencies.
SHIFT_UP = "SHIFT_UP"
SHIFT_DOWN = "SHIFT_DOWN"

EVENT_KINDS = (
    DETENT_ADVANCE,
    DETENT_DROP,
    PAWL_ENGAGE,
    PAWL_DISENGAGE,
    LIMIT,
    REFUSED_CLICK,
    SHIFT_UP,
    SHIFT_DOWN,
)


class PawlMode(Enum):
    ENGAGED = "ENGAGED"
    DISENGAGED = "DISENGAGED"


@dataclass(frozen=True)
class Event:
    """One discrete transition of the hybrid system."""

    t: float
    kind: str
    detent: int
    x: float
    theta: float
    tension: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "kind": self.kind,
            "detent": self.detent,
            "x": self.x,
            "theta": self.theta,
            "tension": self.tension,
        }


@dataclass(frozen=True)
class PivotState:
    """Instantaneous hybrid state of the pivot mechanism."""

    x: float              # pivot position, m
    v: float              # pivot velocity, m/s
    detent: int           # latched detent index (1-based; provisional while disengaged)
    u: float              # commanded cable anchor position, m
    shifter_index: int    # 1..n_detents
    mode: PawlMode
    tension: float        # cached series-spring tension, N


def initial_pivot_state(params: MechanismParams, shifter_index: int = 1) -> PivotState:
    """Pivot seated and engaged at the commanded detent."""
    u = cable_command(params, shifter_index)
    x = detent_position(params, shifter_index)
    return PivotState(
        x=x,
        v=0.0,
        detent=shifter_index,
        u=u,
        shifter_index=shifter_index,
        mode=PawlMode.ENGAGED,
        tension=cable_tension(params, u, x),
    )


def cable_command(params: MechanismParams, shifter_index: int) -> float:
    """Cable anchor target for a shifter index: one click per detent."""
    return detent_position(params, shifter_index) + 0.5 * params.tooth_clearance


def cable_tension(params: MechanismParams, u: float, x: float) -> float:
    """Series-spring tension: unilateral (slack pulls nothing), capped at f_max."""
    f = params.k_s * (u - x)
    if f <= 0.0:
        return 0.0
    return f if f <= params.f_max else params.f_max


def pawl_transition(mode: PawlMode, f_s: float, params: MechanismParams) -> PawlMode:
    """Hysteretic pawl engagement driven by series-spring tension."""
    if mode is PawlMode.DISENGAGED:
        return PawlMode.ENGAGED if f_s >= params.f_engage else PawlMode.DISENGAGED
    return PawlMode.DISENGAGED if f_s < params.f_disengage else PawlMode.ENGAGED


def latch_detent(params: MechanismParams, positions: list[float], x: float) -> int:
    """Detent whose face catches a pawl at x: nearest face within one
    tooth clearance below the pivot, never less than detent 1."""
    idx = bisect_right(positions, x + params.tooth_clearance)
    if idx < 1:
        return 1
    return min(idx, params.n_detents)


class _PivotVars:
    """Mutable working state shared by the stepping core and the engine."""

    __slots__ = ("x", "v", "detent", "u", "shifter_index", "mode",
                 "contact_lo", "contact_hi", "positions")

    def __init__(self, params: MechanismParams, state: PivotState):
        self.x = state.x
        self.v = state.v
        self.detent = state.detent
        self.u = state.u
        self.shifter_index = state.shifter_index
        self.mode = state.mode
        self.contact_lo = False
        self.contact_hi = False
        self.positions = detent_positions(params)

    def freeze(self, params: MechanismParams) -> PivotState:
        return PivotState(
            x=self.x,
            v=self.v,
            detent=self.detent,
            u=self.u,
            shifter_index=self.shifter_index,
            mode=self.mode,
            tension=cable_tension(params, self.u, self.x),
        )


def engaged_advance(params, motion, pv: _PivotVars, t0: float, t1: float,
                    events: list[Event]) -> None:
    """Ratchet the latched pivot up the rack over [t0, t1].

    While engaged the pivot is seated at its detent face (x constant,
    v = 0).  It crosses the next face only when the tension available at
    that face exceeds the reaction force plus the holding threshold; the
    crossing instant is the first entry of |theta| into the feasibility
    window, localized by bisection.
    """
    pos = pv.positions
    n = params.n_detents
    t_cur = t0
    while pv.detent < n:
        x_next = pos[pv.detent]
        f_s = cable_tension(params, pv.u, x_next)
        avail = f_s - params.f0
        if avail <= 0.0:
            break
        kprime = stiffness_derivative(params, x_next)
        gate = math.sqrt(2.0 * avail / kprime) if kprime > 0.0 else math.inf
        t_star = motion.first_entry(t_cur, t1, gate)
        if t_star is None:
            break
        pv.detent += 1
        pv.x = x_next
        pv.v = 0.0
        events.append(Event(t_star, DETENT_ADVANCE, pv.detent, x_next,
                            motion.theta(t_star), f_s))
        t_cur = t_star


def _engage_at(params, motion, pv: _PivotVars, t: float, events: list[Event]) -> None:
    """Catch and seat the pawl: latch the nearest face within reach, snap to it."""
    pv.detent = latch_detent(params, pv.positions, pv.x)
    pv.x = pv.positions[pv.detent - 1]
    pv.v = 0.0
    pv.mode = PawlMode.ENGAGED
    pv.contact_lo = False
    pv.contact_hi = False
    events.append(Event(t, PAWL_ENGAGE, pv.detent, pv.x, motion.theta(t),
                        cable_tension(params, pv.u, pv.x)))


def disengaged_step(params, motion, pv: _PivotVars, t0: float, t1: float,
                    events: list[Event]) -> float | None:
    """Integrate the free pivot over [t0, t1].

    Returns the engage instant if the tension re-crosses the engage
    threshold (the pawl has been seated and pv.mode flipped), else None.
    Emits DETENT_DROP for each face passed on the way down and LIMIT on
    entering a travel stop.
    """
    ks = params.k_s
    f_max = params.f_max
    m = params.m_pivot
    span = params.l + params.d
    two_ks_span = 2.0 * params.k_S * span
    x_min = params.x_min
    x_max = params.x_max
    clearance = params.tooth_clearance
    pos = pv.positions
    u = pv.u
    x_eng = u - params.f_engage / ks

    x = pv.x
    v = pv.v

    dur = t1 - t0
    n_sub = max(1, math.ceil(dur / SUBSTEP - 1e-9))
    h = dur / n_sub
    damp = 1.0 / (1.0 + h * params.c_pivot / m)

    for i_sub in range(n_sub):
        s0 = t0 + i_sub * h
        if ks * (u - x) >= params.f_engage:
            # At or past the engage threshold (exact landings, stale state).
            pv.x = x
            pv.v = v
            _engage_at(params, motion, pv, s0, events)
            return s0
        theta = motion.theta(s0)
        f_s = ks * (u - x)
        if f_s < 0.0:
            f_s = 0.0
        elif f_s > f_max:
            f_s = f_max
        rem = span - x
        reaction = 0.5 * (two_ks_span * x / (rem * rem * rem)) * theta * theta
        v = (v + h * (f_s - reaction) / m) * damp
        x_new = x + h * v
        if not (math.isfinite(x_new) and math.isfinite(v)):
            raise IntegrationError(
                f"pivot state became non-finite near t={s0:.6f} s "
                f"(x={x_new!r}, v={v!r})",
                t_last=s0,
            )

        if x_new < x:
            # Falling: pass detent faces, may re-engage, may hit the stop.
            floor = max(x_new, x_min)
            while pv.detent > 1 and floor < pos[pv.detent - 1] - clearance:
                level = pos[pv.detent - 1] - clearance
                if x_eng >= level:
                    break  # the engage crossing comes first
                t_c = s0 + h * (x - level) / (x - x_new)
                pv.detent -= 1
                events.append(Event(t_c, DETENT_DROP, pv.detent, level,
                                    motion.theta(t_c),
                                    cable_tension(params, u, level)))
            if x_eng >= x_min and x_new <= x_eng < x:
                t_c = s0 + h * (x - x_eng) / (x - x_new)
                pv.x = x_eng
                pv.v = v
                _engage_at(params, motion, pv, t_c, events)
                return t_c
            if x_new < x_min:
                t_c = s0 + h * (x - x_min) / (x - x_new)
                if not pv.contact_lo:
                    pv.contact_lo = True
                    events.append(Event(t_c, LIMIT, pv.detent, x_min,
                                        motion.theta(t_c),
                                        cable_tension(params, u, x_min)))
                x_new = x_min
                v = 0.0
        elif x_new > x_max:
            t_c = s0 + h * (x_new - x_max) / (x_new - x)
            if not pv.contact_hi:
                pv.contact_hi = True
                events.append(Event(t_c, LIMIT, pv.detent, x_max,
                                    motion.theta(t_c),
                                    cable_tension(params, u, x_max)))
            x_new = x_max
            v = 0.0
        x = x_new
        if x > x_min:
            pv.contact_lo = False
        if x < x_max:
            pv.contact_hi = False

    pv.x = x
    pv.v = v
    return None


def pivot_step(state: PivotState, params: MechanismParams, theta: float,
               dt: float) -> tuple[PivotState, list[Event]]:
    """Advance the pivot one step under a frozen joint angle.

    Event timestamps are relative to the start of the step.  The caller
    is responsible for updating `u` (via cable_command) before stepping.
    """
    if dt <= 0.0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if not math.isfinite(theta):
        raise IntegrationError(f"theta is not finite: {theta!r}", t_last=0.0)

    motion = ConstantMotion(theta)
    pv = _PivotVars(params, state)
    events: list[Event] = []

    f_s = cable_tension(params, pv.u, pv.x)
    new_mode = pawl_transition(pv.mode, f_s, params)
    if new_mode is not pv.mode:
        if new_mode is PawlMode.ENGAGED:
            _engage_at(params, motion, pv, 0.0, events)
        else:
            pv.mode = PawlMode.DISENGAGED
            events.append(Event(0.0, PAWL_DISENGAGE, pv.detent, pv.x, theta, f_s))

    t_cur = 0.0
    if pv.mode is PawlMode.DISENGAGED:
        t_eng = disengaged_step(params, motion, pv, 0.0, dt, events)
        if t_eng is None:
            return pv.freeze(params), events
        t_cur = t_eng
    engaged_advance(params, motion, pv, t_cur, dt, events)
    return pv.freeze(params), events


__all__ = [
    "PawlMode",
    "PivotState",
    "Event",
    "cable_command",
    "cable_tension",
    "pawl_transition",
    "pivot_step",
    "initial_pivot_state",
    "latch_detent",
    "SUBSTEP",
    "DETENT_ADVANCE",
    "DETENT_DROP",
    "PAWL_ENGAGE",
    "PAWL_DISENGAGE",
    "LIMIT",
    "REFUSED_CLICK",
    "SHIFT_UP",
    "SHIFT_DOWN",
    "EVENT_KINDS",
]
