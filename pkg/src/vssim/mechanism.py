"""Static relations of the variable stiffness joint.

The joint is a torsional spring of constant stiffness k_S acting on the
output through a lever pair (lengths l and d) with a movable pivot at
position x.  Moving the pivot changes the mechanical advantage, so the
effective joint stiffness is

    k(x) = k_S * (x / (l + d - x))**2

which is strictly increasing in x.  Deflecting the joint by theta stores
energy in the spring and produces a force on the pivot that always pushes
it toward lower stiffness:

    F(theta, x) = 0.5 * dk/dx * theta**2

Everything in this module is a pure function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError, ParameterError, StiffnessRangeError

# Model validity guard for the linear torque law.
THETA_GUARD = math.pi / 2


def _derive_travel(k_s_torsion: float, span: float, k_lo: float, k_hi: float) -> tuple[float, float]:
    """Pivot travel limits that realize joint stiffness k_lo..k_hi."""
    r_lo = math.sqrt(k_lo / k_s_torsion)
    r_hi = math.sqrt(k_hi / k_s_torsion)
    return span * r_lo / (1.0 + r_lo), span * r_hi / (1.0 + r_hi)


_DEFAULT_X_MIN, _DEFAULT_X_MAX = _derive_travel(24.0, 0.100, 6.0, 70.0)


@dataclass(frozen=True)
class MechanismParams:
    """Physical constants of the joint, springs, ratchet, and cable.

    Defaults describe the benchtop prototype: a 24 Nm/rad torsional
    spring, 100 mm lever span, ten detents spanning 6..70 Nm/rad, a
    6000 N/m series spring and a 485 N/m pawl-return spring.
    """

    k_S: float = 24.0            # torsional spring stiffness, Nm/rad
    l: float = 0.080             # spring-side linkage length, m
    d: float = 0.020             # shaft-side linkage length, m
    x_min: float = _DEFAULT_X_MIN  # pivot travel lower limit, m
    x_max: float = _DEFAULT_X_MAX  # pivot travel upper limit, m
    n_detents: int = 10          # count of lockable pivot positions
    tooth_clearance: float = 0.002  # free play of the pawl within a detent, m
    m_pivot: float = 0.05        # mass of the stiffness-modulating mechanism, kg
    c_pivot: float = 20.0        # viscous damping on pivot motion, N*s/m
    k_s: float = 6000.0          # series spring stiffness, N/m
    k_p: float = 485.0           # parallel (pawl-return) spring stiffness, N/m
    f_engage: float = 8.0        # series tension above which the pawl engages, N
    f_disengage: float = 3.0     # series tension below which the pawl disengages, N
    f0: float = 5.0              # detent holding threshold for advancing the pivot, N
    f_max: float = 50.0          # maximum tension the hand shifter can produce, N
    click_travel: float = field(default=0.0)  # cable shortening per click, m (0 -> detent pitch)

    def __post_init__(self):
        if self.k_S <= 0 or self.l <= 0 or self.d <= 0:
            raise ParameterError("k_S, l, d must all be positive")
        if self.k_s <= 0 or self.k_p <= 0:
            raise ParameterError("spring stiffnesses k_s and k_p must be positive")
        if self.m_pivot <= 0:
            raise ParameterError("m_pivot must be positive")
        if self.c_pivot < 0:
            raise ParameterError("c_pivot must be non-negative")
        if not (0.0 < self.x_min < self.x_max < self.l + self.d):
            raise ParameterError(
                f"pivot travel must satisfy 0 < x_min < x_max < l + d; "
                f"got x_min={self.x_min}, x_max={self.x_max}, l+d={self.l + self.d}"
            )
        if self.n_detents < 2:
            raise ParameterError("n_detents must be at least 2")
        pitch = (self.x_max - self.x_min) / (self.n_detents - 1)
        if not (0.0 <= self.tooth_clearance < pitch):
            raise ParameterError(
                f"tooth_clearance must lie in [0, detent pitch); pitch={pitch:.6g}"
            )
        if not (0.0 < self.f_disengage < self.f_engage <= self.f_max):
            raise ParameterError("need 0 < f_disengage < f_engage <= f_max")
        if self.f0 < 0:
            raise ParameterError("f0 must be non-negative")
        if self.click_travel == 0.0:
            object.__setattr__(self, "click_travel", pitch)
        elif self.click_travel <= 0:
            raise ParameterError("click_travel must be positive")

    @property
    def span(self) -> float:
        return self.l + self.d

    @property
    def detent_pitch(self) -> float:
        return (self.x_max - self.x_min) / (self.n_detents - 1)


def default_params(**overrides) -> MechanismParams:
    """Prototype parameter set, with optional field overrides."""
    return MechanismParams(**overrides)


def _check_x(params: MechanismParams, x: float) -> None:
    if x < params.x_min:
        raise DomainError(f"pivot position x={x:.6g} m below x_min={params.x_min:.6g} m")
    if x > params.x_max:
        raise DomainError(f"pivot position x={x:.6g} m above x_max={params.x_max:.6g} m")


def stiffness(params: MechanismParams, x: float) -> float:
    """Joint stiffness k(x) = k_S * (x / (l + d - x))**2, Nm/rad."""
    _check_x(params, x)
    ratio = x / (params.span - x)
    return params.k_S * ratio * ratio


def stiffness_derivative(params: MechanismParams, x: float) -> float:
    """dk/dx = 2 * k_S * x * (l + d) / (l + d - x)**3, Nm/rad/m."""
    _check_x(params, x)
    rem = params.span - x
    return 2.0 * params.k_S * x * params.span / (rem * rem * rem)


def torque_linear(params: MechanismParams, x: float, theta: float) -> float:
    """Joint torque k(x) * theta for small deflections, Nm."""
    if abs(theta) > THETA_GUARD:
        raise DomainError(
            f"|theta|={abs(theta):.6g} rad exceeds the linear-model guard {THETA_GUARD:.6g} rad"
        )
    return stiffness(params, x) * theta


def reaction_force(params: MechanismParams, x: float, theta: float) -> float:
    """Back-driving force on the pivot, 0.5 * dk/dx * theta**2, N.

    Always non-negative: the loaded spring pushes the pivot toward
    lower stiffness regardless of deflection sign.
    """
    return 0.5 * stiffness_derivative(params, x) * theta * theta


def invert_stiffness(params: MechanismParams, k_target: float) -> float:
    """Pivot position realizing a target joint stiffness.

    Closed form: x = (l + d) * r / (1 + r) with r = sqrt(k_target / k_S).
    """
    k_min = stiffness(params, params.x_min)
    k_max = stiffness(params, params.x_max)
    if not (k_min <= k_target <= k_max):
        raise StiffnessRangeError(k_target, k_min, k_max)
    r = math.sqrt(k_target / params.k_S)
    return params.span * r / (1.0 + r)


def detent_positions(params: MechanismParams) -> list[float]:
    """Lockable pivot positions, uniformly spaced from x_min to x_max."""
    n = params.n_detents
    pitch = params.detent_pitch
    positions = [params.x_min + i * pitch for i in range(n)]
    positions[-1] = params.x_max  # exact endpoint regardless of rounding
    return positions


def detent_position(params: MechanismParams, index: int) -> float:
    """Pivot position of a 1-based detent index."""
    if not 1 <= index <= params.n_detents:
        raise DomainError(f"detent index {index} outside 1..{params.n_detents}")
    if index == params.n_detents:
        return params.x_max
    return params.x_min + (index - 1) * params.detent_pitch
