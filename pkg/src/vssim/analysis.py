"""Closed-form shiftability analyses and trace post-processing.

The shiftability question: with the joint swinging sinusoidally, how much
of each cycle is available to move the pivot against the spring reaction
force using a bounded hand force?  With q = f_max / F_max the feasible
fraction of the period, taken as the contiguous window about a single
equilibrium crossing, is

    exact:  (1/pi) * asin(sqrt(q))        (saturating at 1/2)
    bound:  (2/pi) * sqrt(q)              (majorizes the exact window)

Trace post-processing quantifies staircase runs: per-detent dwells, peak
torque, residual pivot motion within a dwell, and per-click shift latency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationTable, torque_from_calibration
from .errors import CalibrationLookupError, DomainError
from .mechanism import (
    MechanismParams,
    THETA_GUARD,
    detent_positions,
    stiffness,
    stiffness_derivative,
    torque_linear,
)
from .ratchet import DETENT_ADVANCE, DETENT_DROP, SHIFT_DOWN, SHIFT_UP
from .sim import Trace

# Constant annotation for reports: torque share of the average human hip
# torque during normal walking that the stiffest setting can supply.
HIP_ASSIST_ANNOTATION = {
    "hip_torque_fraction": 0.35,
    "reference_body_mass_kg": 75.0,
    "reference_walking_speed_mps": 1.6,
    "reference_joint_angle_deg": 30.0,
}

TIMING_WINDOW_NOTE = (
    "exact_fraction is the contiguous feasibility window about one "
    "equilibrium crossing; bound_fraction = (2/pi)*sqrt(q) majorizes it "
    "for all q in [0, 1]."
)


@dataclass(frozen=True)
class TimingWindow:
    """Feasible shift-window fractions of the oscillation period."""

    q: float               # force ratio f_max / F_max
    bound_fraction: float  # (2/pi) * sqrt(min(q, 1))
    exact_fraction: float  # (1/pi) * asin(sqrt(min(q, 1)))


def timing_window(q: float) -> TimingWindow:
    if q < 0:
        raise DomainError(f"force ratio q must be non-negative, got {q}")
    z = math.sqrt(min(q, 1.0))
    return TimingWindow(
        q=q,
        bound_fraction=(2.0 / math.pi) * z,
        exact_fraction=math.asin(z) / math.pi,
    )


def reaction_force_max(params: MechanismParams, x: float, theta_max: float) -> float:
    """Peak spring reaction force on the pivot over a cycle of amplitude theta_max."""
    return 0.5 * stiffness_derivative(params, x) * theta_max * theta_max


def shiftable_angle(params: MechanismParams, x: float, f_avail: float) -> float:
    """Largest |theta| at which a force f_avail can still move the pivot.

    Inverts F(theta, x) = f_avail.  A vanishing stiffness gradient means
    the window is unbounded; it is then reported saturated at the linear
    model's validity guard.
    """
    if f_avail < 0:
        raise DomainError(f"f_avail must be non-negative, got {f_avail}")
    kprime = stiffness_derivative(params, x)
    if kprime <= 0.0:
        return THETA_GUARD
    return min(math.sqrt(2.0 * f_avail / kprime), THETA_GUARD)


@dataclass(frozen=True)
class StiffnessRangeRow:
    index: int
    x: float
    k: float
    tau_at_30deg: float


@dataclass(frozen=True)
class StiffnessRangeReport:
    rows: tuple[StiffnessRangeRow, ...]
    annotation: dict = field(default_factory=lambda: dict(HIP_ASSIST_ANNOTATION))

    def to_dict(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "annotation": dict(self.annotation),
        }


def stiffness_range_report(params: MechanismParams) -> StiffnessRangeReport:
    """Per-detent stiffness and torque at the reference 30 degree deflection."""
    theta_ref = math.radians(30.0)
    rows = []
    for i, x in enumerate(detent_positions(params), start=1):
        rows.append(StiffnessRangeRow(
            index=i, x=x, k=stiffness(params, x),
            tau_at_30deg=torque_linear(params, x, theta_ref),
        ))
    return StiffnessRangeReport(rows=tuple(rows))


def estimate_torque_trace(trace: Trace, table: CalibrationTable) -> np.ndarray:
    """Experiment-style torque estimate: per sample, interpolate the active
    detent's calibration curve at the sampled joint angle."""
    detents = np.unique(trace.detent)
    missing = [int(d) for d in detents if int(d) not in table.curves]
    if missing:
        raise CalibrationLookupError(
            f"trace uses detents missing from the calibration table: {missing}"
        )
    tau_hat = np.empty(len(trace.t))
    for d in detents:
        mask = trace.detent == d
        angles, torques = table.curves[int(d)]
        th = trace.theta[mask]
        if th.min() < angles[0] or th.max() > angles[-1]:
            # Surface the same error the scalar path would give.
            bad = th[np.argmax((th < angles[0]) | (th > angles[-1]))]
            torque_from_calibration(table, int(d), float(bad))
        tau_hat[mask] = np.interp(th, angles, torques)
    return tau_hat


@dataclass(frozen=True)
class Dwell:
    detent: int
    t_start: float
    t_end: float
    peak_abs_tau: float
    float_amplitude: float  # max |x - detent position| over the dwell

    def to_dict(self) -> dict:
        return vars(self)


@dataclass(frozen=True)
class ShiftLatency:
    direction: str   # "up" or "down"
    t_command: float
    t_realized: float

    @property
    def latency(self) -> float:
        return self.t_realized - self.t_command

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "t_command": self.t_command,
            "t_realized": self.t_realized,
            "latency": self.latency,
        }


@dataclass(frozen=True)
class StaircaseReport:
    dwells: tuple[Dwell, ...]
    latencies: tuple[ShiftLatency, ...]
    pending_up: int    # accepted up clicks not yet realized at run end
    pending_down: int

    def to_dict(self) -> dict:
        return {
            "dwells": [d.to_dict() for d in self.dwells],
            "latencies": [l.to_dict() for l in self.latencies],
            "pending_up": self.pending_up,
            "pending_down": self.pending_down,
            "summary": {
                "n_dwells": len(self.dwells),
                "detent_min": min((d.detent for d in self.dwells), default=None),
                "detent_max": max((d.detent for d in self.dwells), default=None),
                "max_float_amplitude": max((d.float_amplitude for d in self.dwells),
                                           default=0.0),
                "max_up_latency": max((l.latency for l in self.latencies
                                       if l.direction == "up"), default=None),
                "max_down_latency": max((l.latency for l in self.latencies
                                         if l.direction == "down"), default=None),
            },
        }


def staircase_metrics(trace: Trace, params: MechanismParams | None = None) -> StaircaseReport:
    """Quantify the detent staircase of a trace.

    Works entirely from the per-sample columns (detent, x, tau, event
    kinds), so a trace re-loaded from CSV reproduces the same report.
    Shift latencies pair accepted clicks with realized detent changes in
    arrival order, quantized to the sample grid.
    """
    if params is None:
        if trace.config is None:
            raise DomainError("staircase_metrics needs params (trace has no config)")
        params = trace.config.params
    positions = detent_positions(params)
    t = trace.t
    detent = trace.detent
    n = len(t)

    dwells = []
    start = 0
    for i in range(1, n + 1):
        if i == n or detent[i] != detent[start]:
            d = int(detent[start])
            seg = slice(start, i)
            dwells.append(Dwell(
                detent=d,
                t_start=float(t[start]),
                t_end=float(t[i - 1]),
                peak_abs_tau=float(np.max(np.abs(trace.tau[seg]))),
                float_amplitude=float(np.max(np.abs(trace.x[seg] - positions[d - 1]))),
            ))
            start = i

    kinds = trace.event_kinds_per_sample()
    up_queue: list[float] = []
    down_queue: list[float] = []
    latencies: list[ShiftLatency] = []
    for i, cell in enumerate(kinds):
        if not cell:
            continue
        ti = float(t[i])
        for kind in cell.split(";"):
            if kind == SHIFT_UP:
                up_queue.append(ti)
            elif kind == SHIFT_DOWN:
                down_queue.append(ti)
            elif kind == DETENT_ADVANCE and up_queue:
                latencies.append(ShiftLatency("up", up_queue.pop(0), ti))
            elif kind == DETENT_DROP and down_queue:
                latencies.append(ShiftLatency("down", down_queue.pop(0), ti))
    return StaircaseReport(
        dwells=tuple(dwells),
        latencies=tuple(latencies),
        pending_up=len(up_queue),
        pending_down=len(down_queue),
    )
