"""Exception types shared across the simulator."""


class VssimError(Exception):
    """Base class for all simulator errors."""


class ParameterError(VssimError):
    """A mechanism parameter violates a construction invariant."""


class DomainError(VssimError):
    """An input lies outside the valid domain of an operation."""


class StiffnessRangeError(VssimError):
    """Requested stiffness is not achievable within the pivot travel."""

    def __init__(self, k_target, k_min, k_max):
        self.k_target = k_target
        self.k_min = k_min
        self.k_max = k_max
        super().__init__(
            f"stiffness {k_target:.6g} Nm/rad unreachable; "
            f"achievable range is [{k_min:.6g}, {k_max:.6g}] Nm/rad"
        )


class CalibrationLookupError(VssimError, LookupError):
    """A detent index is missing from a calibration table."""


class CalibrationRangeError(VssimError):
    """A query angle lies outside a calibration curve's knot span."""


class ConfigError(VssimError):
    """A run configuration file or SimConfig is malformed."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class IntegrationError(VssimError):
    """The pivot integration produced a non-finite state."""

    def __init__(self, message, t_last=None):
        self.t_last = t_last
        super().__init__(message)
