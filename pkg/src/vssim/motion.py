"""Prescribed joint motion.

The leg angle is imposed kinematically as a sinusoid; the simulator never
solves leg dynamics.  Besides evaluating theta(t), the profile can locate
the first instant at which |theta| dips below a level, which is how the
hybrid engine localizes force-feasibility windows around the equilibrium
crossings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

# Event localization target, seconds.
TIME_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MotionProfile:
    """theta(t) = theta_max * sin(omega * t + phase)."""

    theta_max: float   # amplitude, rad
    omega: float       # angular frequency, rad/s
    phase: float = 0.0 # rad

    def __post_init__(self):
        if self.theta_max < 0:
            raise ParameterError("theta_max must be non-negative")
        if self.omega <= 0:
            raise ParameterError("omega must be positive")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def theta(self, t: float) -> float:
        return self.theta_max * math.sin(self.omega * t + self.phase)

    def theta_dot(self, t: float) -> float:
        return self.theta_max * self.omega * math.cos(self.omega * t + self.phase)

    def first_entry(self, t0: float, t1: float, level: float) -> float | None:
        """Earliest t in [t0, t1] with |theta(t)| <= level, or None.

        The entry instant is bracketed in closed form and then refined by
        bisection on the inequality itself, so callers get a time that is
        strictly inside the window (to within TIME_TOLERANCE).
        """
        if level < 0.0:
            return None
        if self.theta_max <= level:
            return t0
        w = self.omega
        s = level / self.theta_max
        alpha = math.asin(s)  # half-width in phase of each window about k*pi
        psi0 = w * t0 + self.phase
        k = math.ceil((psi0 - alpha) / math.pi)
        psi_star = k * math.pi - alpha
        if psi_star <= psi0:
            return t0  # already inside a window
        t_star = (psi_star - self.phase) / w
        if t_star > t1:
            return None
        # Refine between the window edge and its center (the equilibrium
        # crossing).  The bracket depends only on the window geometry, not
        # on [t0, t1], so different interval chunkings localize the same
        # entry to the same instant.
        t_center = (k * math.pi - self.phase) / w
        hi = t_center
        lo = max(t_center - 0.25 * self.period, t_star - (t_center - t_star))
        if abs(self.theta(lo)) < level:
            return max(t0, lo)
        while hi - lo > TIME_TOLERANCE:
            mid = 0.5 * (lo + hi)
            if abs(self.theta(mid)) < level:
                hi = mid
            else:
                lo = mid
        if hi > t1:
            return None
        return hi


@dataclass(frozen=True)
class ConstantMotion:
    """Frozen deflection; used when stepping the pivot at a fixed angle."""

    value: float

    def theta(self, t: float) -> float:
        return self.value

    def theta_dot(self, t: float) -> float:
        return 0.0

    def first_entry(self, t0: float, t1: float, level: float) -> float | None:
        return t0 if abs(self.value) <= level else None


def prescribed_theta(profile: MotionProfile, t: float) -> tuple[float, float]:
    """Joint angle and angular velocity at time t."""
    if t < 0:
        raise ParameterError("t must be non-negative")
    return profile.theta(t), profile.theta_dot(t)
