"""Per-detent torque-angle calibration curves.

A calibration table holds one monotone (angle, torque) curve per detent
index, the same structure as a static deflection experiment produces.
Torque estimation interpolates piecewise-linearly on the curve of the
active detent and refuses to extrapolate.  A synthetic generator samples
the linear torque model at the detent positions, standing in for
measured data.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CalibrationLookupError, CalibrationRangeError, DomainError, ParameterError
from .mechanism import MechanismParams, detent_positions, torque_linear

ORIGIN_TOLERANCE_NM = 0.1

CSV_HEADER = ["detent", "angle_rad", "torque_nm"]


@dataclass(frozen=True)
class CalibrationTable:
    """Monotone torque-angle curves keyed by 1-based detent index."""

    curves: dict[int, tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        if not self.curves:
            raise ParameterError("calibration table has no curves")
        for detent, (angles, torques) in self.curves.items():
            if angles.ndim != 1 or angles.shape != torques.shape or angles.size == 0:
                raise ParameterError(f"detent {detent}: malformed curve arrays")
            if angles.size > 1 and not np.all(np.diff(angles) > 0):
                raise ParameterError(f"detent {detent}: angles must be strictly increasing")
            origin = float(np.interp(0.0, angles, torques))
            if not (angles[0] <= 0.0 <= angles[-1]) or abs(origin) > ORIGIN_TOLERANCE_NM:
                raise ParameterError(
                    f"detent {detent}: curve must pass through (0, 0) within "
                    f"{ORIGIN_TOLERANCE_NM} Nm"
                )
        self._check_detent_monotonicity()

    def _check_detent_monotonicity(self):
        indices = sorted(self.curves)
        for lo, hi in zip(indices, indices[1:]):
            a_lo, t_lo = self.curves[lo]
            a_hi, t_hi = self.curves[hi]
            left = max(a_lo[0], a_hi[0])
            right = min(a_lo[-1], a_hi[-1])
            if left > right:
                continue
            probe = np.linspace(left, right, 33)
            soft = np.interp(probe, a_lo, t_lo)
            stiff = np.interp(probe, a_hi, t_hi)
            # Non-decreasing in detent for positive angles, non-increasing for negative.
            bad = np.abs(stiff) + 1e-9 < np.abs(soft)
            if np.any(bad):
                raise ParameterError(
                    f"torque magnitude decreases from detent {lo} to {hi}; "
                    "higher detents must be at least as stiff"
                )

    @property
    def detents(self) -> list[int]:
        return sorted(self.curves)

    def angle_span(self, detent: int) -> tuple[float, float]:
        angles, _ = self._curve(detent)
        return float(angles[0]), float(angles[-1])

    def _curve(self, detent: int) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self.curves[detent]
        except KeyError:
            raise CalibrationLookupError(
                f"detent {detent} not in calibration table (have {self.detents})"
            ) from None


def torque_from_calibration(table: CalibrationTable, detent: int, theta: float) -> float:
    """Piecewise-linear torque lookup on one detent's curve, Nm."""
    angles, torques = table._curve(detent)
    if theta < angles[0] or theta > angles[-1]:
        raise CalibrationRangeError(
            f"theta={theta:.6g} rad outside calibrated span "
            f"[{angles[0]:.6g}, {angles[-1]:.6g}] of detent {detent}"
        )
    return float(np.interp(theta, angles, torques))


def generate_synthetic_calibration(
    params: MechanismParams,
    angle_step: float = math.radians(1.0),
    theta_span: float = math.radians(30.0),
) -> CalibrationTable:
    """Table sampled from the linear torque model at every detent position."""
    if angle_step <= 0:
        raise DomainError(f"angle_step must be positive, got {angle_step:.6g}")
    if theta_span < 0:
        raise DomainError(f"theta_span must be non-negative, got {theta_span:.6g}")
    positive = np.arange(angle_step, theta_span + 1e-12, angle_step)
    angles = np.concatenate([-positive[::-1], [0.0], positive])
    curves = {}
    for i, x in enumerate(detent_positions(params), start=1):
        torques = np.array([torque_linear(params, x, a) for a in angles])
        curves[i] = (angles.copy(), torques)
    return CalibrationTable(curves)


def save_calibration_csv(table: CalibrationTable, path: str | Path) -> None:
    Path(path).write_text(calibration_to_csv(table), encoding="utf-8")


def calibration_to_csv(table: CalibrationTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_HEADER)
    for detent in table.detents:
        angles, torques = table.curves[detent]
        for a, tq in zip(angles, torques):
            writer.writerow([detent, repr(float(a)), repr(float(tq))])
    return buf.getvalue()


def load_calibration_csv(path: str | Path) -> CalibrationTable:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CSV_HEADER:
            raise ParameterError(f"unexpected calibration header {header}, want {CSV_HEADER}")
        for row in reader:
            rows.append((int(row[0]), float(row[1]), float(row[2])))
    curves: dict[int, tuple[list[float], list[float]]] = {}
    for detent, angle, torque in rows:
        angles, torques = curves.setdefault(detent, ([], []))
        angles.append(angle)
        torques.append(torque)
    return CalibrationTable(
        {d: (np.asarray(a), np.asarray(t)) for d, (a, t) in curves.items()}
    )
