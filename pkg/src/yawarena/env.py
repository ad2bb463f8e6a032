"""Episodic two-track wind-farm environment.

The agent track receives the protagonist's yaw commands; a lockstep
baseline twin keeps zero yaw offsets under the identical inflow. The
reward compares trailing farm-power averages of the two tracks, always
from uncorrupted physics. Observations stack the current and 10 previous
sensor frames, normalized to [-1, 1]; a corrupted variant applies the
sensor errors that were active at each frame's own timestamp.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field

import numpy as np

from . import noise as nz
from .wake import (FarmLayout, InflowCondition, WakeState, step_physics,
                   turbine_power, two_turbine_layout)


class EpisodeFinishedError(RuntimeError):
    """step() called after the episode terminated."""


@dataclass(frozen=True)
class EnvConfig:
    physics_dt: float = 5.0
    control_dt: float = 10.0
    episode_duration: float = 2000.0
    history_length: int = 11          # current + 10 preceding frames
    speed_min: float = 6.0
    speed_max: float = 7.0
    direction_min: float = 267.0
    direction_max: float = 273.0
    # normalization bounds per signal
    speed_bounds: tuple[float, float] = (0.0, 30.0)
    direction_bounds: tuple[float, float] = (0.0, 360.0)
    yaw_bounds: tuple[float, float] = (-45.0, 45.0)
    power_bounds: tuple[float, float] = (0.0, 2.0e6)
    max_yaw_delta: float = 3.0        # deg per control step
    reward_window: int = 10           # trailing agent steps

    def __post_init__(self):
        n_sub = self.control_dt / self.physics_dt
        if abs(n_sub - round(n_sub)) > 1e-9 or n_sub < 1:
            raise ValueError("control_dt must be an integer multiple of physics_dt")
        if self.history_length < 1:
            raise ValueError("history_length must be >= 1")
        steps = self.episode_duration / self.control_dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("episode_duration must be a multiple of control_dt")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    @property
    def episode_steps(self) -> int:
        return int(round(self.episode_duration / self.control_dt))

    def signal_bounds(self, signal: int) -> tuple[float, float]:
        return (self.speed_bounds, self.direction_bounds,
                self.yaw_bounds, self.power_bounds)[signal]


@dataclass
class RewardSample:
    reward: float
    power_agent: float       # trailing farm-power mean, W
    power_baseline: float


def normalize(value, signal: int, config: EnvConfig):
    """Affine map from physical bounds to [-1, 1], then clamp."""
    lo, hi = config.signal_bounds(signal)
    return np.clip(2.0 * (np.asarray(value, dtype=np.float64) - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def denormalize(value, signal: int, config: EnvConfig):
    """Exact inverse of normalize inside the bounds."""
    lo, hi = config.signal_bounds(signal)
    return (np.asarray(value, dtype=np.float64) + 1.0) * (hi - lo) / 2.0 + lo


def normalize_frame(frame: np.ndarray, config: EnvConfig) -> np.ndarray:
    out = np.empty_like(frame)
    for s in range(nz.N_SIGNALS):
        out[:, s] = normalize(frame[:, s], s, config)
    return out


class WindFarmEnv:
    """Single episodic environment instance; exclusively owned by one
    rollout worker."""

    def __init__(self, config: EnvConfig | None = None, layout: FarmLayout | None = None,
                 seed: int | np.random.Generator = 0):
        self.config = config or EnvConfig()
        self.layout = layout or two_turbine_layout()
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.inflow: InflowCondition | None = None
        self._done = True
        self.step_count = 0

    @property
    def n_turbines(self) -> int:
        return self.layout.n_turbines

    @property
    def obs_dim(self) -> int:
        return self.config.history_length * self.n_turbines * nz.N_SIGNALS

    def sample_inflow(self) -> InflowCondition:
        c = self.config
        speed = self.rng.uniform(c.speed_min, c.speed_max)
        direction = self.rng.uniform(c.direction_min, c.direction_max)
        return InflowCondition(speed, direction)

    def reset(self, inflow: InflowCondition | None = None):
        c = self.config
        if inflow is None:
            inflow = self.sample_inflow()
        else:
            if not (c.speed_min <= inflow.speed <= c.speed_max and
                    c.direction_min <= inflow.direction <= c.direction_max):
                raise ValueError(f"inflow {inflow} outside configured bounds")
        self.inflow = inflow
        self.step_count = 0
        self._done = False
        min_speed = max(c.speed_min - 1.0, 1.0)
        self._agent_track = WakeState(self.layout, c.physics_dt, min_speed)
        self._baseline_track = WakeState(self.layout, c.physics_dt, min_speed)
        self._agent_powers = collections.deque(maxlen=c.reward_window)
        self._baseline_powers = collections.deque(maxlen=c.reward_window)

        # both tracks start settled at zero yaw (buffers pre-filled)
        zero = np.zeros(self.n_turbines)
        speeds = step_physics(self._agent_track, self.layout, inflow, zero, c.physics_dt)
        step_physics(self._baseline_track, self.layout, inflow, zero, c.physics_dt)
        frame = self._make_frame(speeds, zero)
        self._true_frames = collections.deque(maxlen=c.history_length)
        self._corr_frames = collections.deque(maxlen=c.history_length)
        for _ in range(c.history_length):
            self._true_frames.append(frame.copy())
            self._corr_frames.append(frame.copy())
        return self.true_observation(), self.corrupted_observation()

    def _make_frame(self, speeds: np.ndarray, yaw: np.ndarray) -> np.ndarray:
        spec = self.layout.spec
        frame = np.empty((self.n_turbines, nz.N_SIGNALS))
        frame[:, nz.SIG_SPEED] = speeds
        frame[:, nz.SIG_DIRECTION] = self.inflow.direction
        frame[:, nz.SIG_YAW] = yaw
        frame[:, nz.SIG_POWER] = [turbine_power(spec, float(u), float(g))
                                  for u, g in zip(speeds, yaw)]
        return frame

    def _stack(self, frames) -> np.ndarray:
        # oldest to newest
        return np.concatenate([normalize_frame(f, self.config).ravel() for f in frames])

    def true_observation(self) -> np.ndarray:
        return self._stack(self._true_frames)

    def corrupted_observation(self) -> np.ndarray:
        return self._stack(self._corr_frames)

    @property
    def done(self) -> bool:
        return self._done

    @property
    def agent_yaw(self) -> np.ndarray:
        return self._agent_track.yaw.copy()

    def step(self, delta_yaw: np.ndarray, eps: np.ndarray | None = None):
        """Advance one control step.

        delta_yaw: requested yaw change per turbine (deg), clamped to
        +-max_yaw_delta. eps: additive sensor errors (n_turbines, 4) in
        physical units, or None for a clean step.
        Returns (true_obs, corrupted_obs, RewardSample, done).
        """
        if self._done:
            raise EpisodeFinishedError("episode already finished; call reset()")
        c = self.config
        delta = np.clip(np.asarray(delta_yaw, dtype=np.float64),
                        -c.max_yaw_delta, c.max_yaw_delta)
        target_yaw = np.clip(self._agent_track.yaw + delta,
                             -WakeState.MAX_YAW, WakeState.MAX_YAW)
        zero = np.zeros(self.n_turbines)
        spec = self.layout.spec

        p_agent_sub = 0.0
        p_base_sub = 0.0
        for _ in range(c.substeps):
            speeds = step_physics(self._agent_track, self.layout, self.inflow,
                                  target_yaw, c.physics_dt)
            base_speeds = step_physics(self._baseline_track, self.layout, self.inflow,
                                       zero, c.physics_dt)
            p_agent_sub += sum(turbine_power(spec, float(u), float(g))
                               for u, g in zip(speeds, self._agent_track.yaw))
            p_base_sub += sum(turbine_power(spec, float(u), 0.0) for u in base_speeds)
        p_agent = p_agent_sub / c.substeps
        p_base = p_base_sub / c.substeps
        self._agent_powers.append(p_agent)
        self._baseline_powers.append(p_base)

        mean_agent = sum(self._agent_powers) / len(self._agent_powers)
        mean_base = sum(self._baseline_powers) / len(self._baseline_powers)
        reward = mean_agent / mean_base - 1.0

        frame = self._make_frame(speeds, self._agent_track.yaw)
        self._true_frames.append(frame)
        self._corr_frames.append(nz.apply_errors(frame, eps))

        self.step_count += 1
        if self.step_count >= c.episode_steps:
            self._done = True
        sample = RewardSample(reward, mean_agent, mean_base)
        return self.true_observation(), self.corrupted_observation(), sample, self._done
