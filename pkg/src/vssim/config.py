"""Run configuration files.

A run config is a JSON document mirroring SimConfig, all physical fields
in SI units.  Unknown keys are rejected; missing keys fall back to the
prototype defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

from .errors import ConfigError, ParameterError
from .mechanism import MechanismParams
from .motion import MotionProfile
from .sim import DOWN, UP, ShiftCommand, SimConfig, replication_config

_PARAM_FIELDS = {f.name for f in dataclasses.fields(MechanismParams)}
_PROFILE_KEYS = {"amplitude_rad", "frequency_hz", "phase_rad"}
_TOP_KEYS = {"params", "profile", "schedule", "dt", "duration", "initial_index",
             "seed", "output_dir"}
_SCHEDULE_KEYS = {"t", "direction"}

DEFAULT_PROFILE = {"amplitude_rad": math.radians(20.0), "frequency_hz": 0.8,
                   "phase_rad": 0.0}


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}", field=unknown[0])


def _number(d: dict, key: str, default, where: str) -> float:
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}", field=key)
    return value


def config_from_dict(doc: dict) -> tuple[SimConfig, dict]:
    """Build a SimConfig from a parsed JSON document.

    Returns (config, extras) where extras holds non-simulation keys such
    as output_dir.
    """
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "run config")

    params_doc = doc.get("params", {})
    if not isinstance(params_doc, dict):
        raise ConfigError("params must be an object", field="params")
    _reject_unknown(params_doc, _PARAM_FIELDS, "params")
    try:
        params = MechanismParams(**params_doc)
    except ParameterError as exc:
        raise ConfigError(f"invalid params: {exc}", field="params") from exc
    except TypeError as exc:
        raise ConfigError(f"invalid params: {exc}", field="params") from exc

    profile_doc = doc.get("profile", {})
    if not isinstance(profile_doc, dict):
        raise ConfigError("profile must be an object", field="profile")
    _reject_unknown(profile_doc, _PROFILE_KEYS, "profile")
    amplitude = _number(profile_doc, "amplitude_rad", DEFAULT_PROFILE["amplitude_rad"],
                        "profile")
    frequency = _number(profile_doc, "frequency_hz", DEFAULT_PROFILE["frequency_hz"],
                        "profile")
    phase = _number(profile_doc, "phase_rad", DEFAULT_PROFILE["phase_rad"], "profile")
    if frequency <= 0:
        raise ConfigError(f"profile.frequency_hz must be positive, got {frequency}",
                          field="frequency_hz")
    try:
        profile = MotionProfile(theta_max=float(amplitude),
                                omega=2.0 * math.pi * float(frequency),
                                phase=float(phase))
    except ParameterError as exc:
        raise ConfigError(f"invalid profile: {exc}", field="profile") from exc

    schedule_doc = doc.get("schedule", [])
    if not isinstance(schedule_doc, list):
        raise ConfigError("schedule must be a list", field="schedule")
    schedule = []
    for i, entry in enumerate(schedule_doc):
        if not isinstance(entry, dict):
            raise ConfigError(f"schedule[{i}] must be an object", field="schedule")
        _reject_unknown(entry, _SCHEDULE_KEYS, f"schedule[{i}]")
        t = _number(entry, "t", None, f"schedule[{i}]") if "t" in entry else None
        if t is None:
            raise ConfigError(f"schedule[{i}] missing 't'", field="schedule")
        direction = entry.get("direction")
        if direction not in (UP, DOWN):
            raise ConfigError(
                f"schedule[{i}].direction must be '{UP}' or '{DOWN}', got {direction!r}",
                field="schedule")
        schedule.append(ShiftCommand(float(t), direction))

    dt = _number(doc, "dt", 0.001, "config")
    duration = _number(doc, "duration", 60.0, "config")
    initial_index = doc.get("initial_index", 1)
    if isinstance(initial_index, bool) or not isinstance(initial_index, int):
        raise ConfigError(f"initial_index must be an integer, got {initial_index!r}",
                          field="initial_index")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}", field="seed")

    config = SimConfig(params=params, profile=profile, schedule=tuple(schedule),
                       dt=float(dt), duration=float(duration),
                       initial_index=initial_index, seed=seed)
    extras = {"output_dir": doc.get("output_dir")}
    return config, extras


def load_run_config(path: str | Path) -> tuple[SimConfig, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(config: SimConfig) -> dict:
    """Round-trippable JSON form of a SimConfig (defaults made explicit)."""
    return {
        "params": dataclasses.asdict(config.params),
        "profile": {
            "amplitude_rad": config.profile.theta_max,
            "frequency_hz": config.profile.omega / (2.0 * math.pi),
            "phase_rad": config.profile.phase,
        },
        "schedule": [{"t": c.t, "direction": c.direction} for c in config.schedule],
        "dt": config.dt,
        "duration": config.duration,
        "initial_index": config.initial_index,
        "seed": config.seed,
    }


def scenario_config(name: str, params: MechanismParams | None = None) -> SimConfig:
    if name == "replication":
        return replication_config(params)
    raise ConfigError(f"unknown scenario {name!r}; available: replication",
                      field="scenario")
