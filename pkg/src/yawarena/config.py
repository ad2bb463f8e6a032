"""Declarative run configuration with strict validation.

A run config is a JSON document; unknown keys are rejected with the
offending field named. Defaults reproduce the reference setup (two
turbines at 7 D, 6-7 m/s / 267-273 deg inflow, the standard noise table
and PPO hyperparameters) so a minimal config only needs a schedule.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

from .agents import ExpertConfig
from .env import EnvConfig
from .noise import NoiseBounds
from .ppo import PpoConfig
from .wake import TurbineSpec

SCHEDULES = ("arms_race", "ssp", "self_play", "procedural_only")

TOOL_VERSION = "0.1.0"


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class RunConfig:
    schedule: str = "arms_race"
    run_name: str = "run"
    seed: int = 0
    n_iterations: int = 3
    warm_start: bool = False
    spacing_diameters: float = 7.0
    env: EnvConfig = field(default_factory=EnvConfig)
    noise: NoiseBounds = field(default_factory=NoiseBounds)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    turbine: TurbineSpec = field(default_factory=TurbineSpec)
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    eval_seed: int = 12345

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.n_iterations < 1:
            raise ConfigError("n_iterations must be >= 1")


_NESTED = {
    "env": EnvConfig,
    "noise": NoiseBounds,
    "ppo": PpoConfig,
    "turbine": TurbineSpec,
    "expert": ExpertConfig,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field")
    kwargs = {}
    for key, value in data.items():
        if cls is RunConfig and key in _NESTED:
            value = _build(_NESTED[key], value, f"{path}.{key}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def load_config(path) -> RunConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return config_from_dict(data)


def save_config(path, config: RunConfig) -> None:
    with open(path, "w") as f:
        json.dump(config_to_dict(config), f, indent=2, sort_keys=True)


def config_hash(config: RunConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
