"""Simulator of a hand-shifted variable stiffness spring joint."""

from .analysis import (
    ShiftLatency,
    StaircaseReport,
    StiffnessRangeReport,
    TimingWindow,
    estimate_torque_trace,
    reaction_force_max,
    shiftable_angle,
    staircase_metrics,
    stiffness_range_report,
    timing_window,
)
from .calibration import (
    CalibrationTable,
    generate_synthetic_calibration,
    load_calibration_csv,
    save_calibration_csv,
    torque_from_calibration,
)
from .errors import (
    CalibrationLookupError,
    CalibrationRangeError,
    ConfigError,
    DomainError,
    IntegrationError,
    ParameterError,
    StiffnessRangeError,
    VssimError,
)
from .mechanism import (
    MechanismParams,
    default_params,
    detent_position,
    detent_positions,
    invert_stiffness,
    reaction_force,
    stiffness,
    stiffness_derivative,
    torque_linear,
)
from .motion import ConstantMotion, MotionProfile, prescribed_theta
from .ratchet import (
    Event,
    PawlMode,
    PivotState,
    cable_command,
    cable_tension,
    initial_pivot_state,
    pawl_transition,
    pivot_step,
)
from .sim import (
    DOWN,
    UP,
    ShiftCommand,
    SimConfig,
    SimEngine,
    Trace,
    TraceSample,
    load_events_jsonl,
    replication_config,
    simulate,
)

__version__ = "0.1.0"
