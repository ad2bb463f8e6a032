"""Bindings between the environment, a trainee role, and an opponent.

A task presents the single-agent interface PPO consumes: current_obs,
reset(), and step(raw_action) -> (obs, reward, done). Opponent sources
produce the additive sensor-error frame passed to the environment each
control step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nets
from . import noise as nz
from .agents import PolicyAgent
from .env import WindFarmEnv


class CleanOpponent:
    """No sensor corruption."""

    label = "clean"

    def reset(self, env: WindFarmEnv) -> None:
        pass

    def compute_eps(self, true_obs: np.ndarray, env: WindFarmEnv):
        return None


class ProceduralOpponent:
    """Eq-style procedural noise: episode-constant bias plus white noise."""

    label = "procedural"

    def __init__(self, bounds: nz.NoiseBounds, rng: np.random.Generator):
        self.bounds = bounds
        self.rng = rng
        self._state: nz.ProceduralNoiseState | None = None

    def reset(self, env: WindFarmEnv) -> None:
        self._state = nz.ProceduralNoiseState(env.n_turbines, self.bounds, self.rng)

    def compute_eps(self, true_obs: np.ndarray, env: WindFarmEnv) -> np.ndarray:
        return self._state.sample()


class PolicyOpponent:
    """Frozen adversary policy driving a bounded sensor-error state.

    Frozen opponents act deterministically (Gaussian mean).
    """

    def __init__(self, agent: PolicyAgent, bounds: nz.NoiseBounds, label: str):
        self.agent = agent
        self.bounds = bounds
        self.label = label
        self._error: nz.SensorErrorState | None = None

    def reset(self, env: WindFarmEnv) -> None:
        self._error = nz.SensorErrorState(env.n_turbines, self.bounds)

    def compute_eps(self, true_obs: np.ndarray, env: WindFarmEnv) -> np.ndarray:
        mean = nets.forward(self.agent.actor, true_obs)
        requested = nz.scale_adversary_output(mean, env.n_turbines, self.bounds)
        nz.apply_delta(self._error, requested, self.bounds)
        return self._error.values.copy()


class PoolOpponent:
    """Uniformly resamples a member opponent at every episode start."""

    def __init__(self, members: list, rng: np.random.Generator):
        if not members:
            raise ValueError("opponent pool must be non-empty")
        self.members = members
        self.rng = rng
        self.active = members[0]

    def sample(self):
        return self.members[int(self.rng.integers(len(self.members)))]

    @property
    def label(self) -> str:
        return self.active.label

    def reset(self, env: WindFarmEnv) -> None:
        self.active = self.sample()
        self.active.reset(env)

    def compute_eps(self, true_obs: np.ndarray, env: WindFarmEnv):
        return self.active.compute_eps(true_obs, env)


class ProtagonistTask:
    """Trainee: yaw controller observing corrupted sensors; reward r_t."""

    def __init__(self, env: WindFarmEnv, opponent, audit=None):
        self.env = env
        self.opponent = opponent
        self.audit = audit
        self.needs_reset = True
        self.episode_index = 0
        self.current_obs = None
        self._true_obs = None

    @property
    def action_dim(self) -> int:
        return self.env.n_turbines

    def reset(self):
        true_obs, corr_obs = self.env.reset()
        self.opponent.reset(self.env)
        self._true_obs = true_obs
        self.current_obs = corr_obs
        self.needs_reset = False
        if self.audit is not None:
            self.audit(self.episode_index, self.opponent.label)
        self.episode_index += 1
        return corr_obs

    def step(self, raw_action: np.ndarray):
        delta = np.clip(raw_action, -1.0, 1.0) * self.env.config.max_yaw_delta
        eps = self.opponent.compute_eps(self._true_obs, self.env)
        true_obs, corr_obs, sample, done = self.env.step(delta, eps)
        self._true_obs = true_obs
        self.current_obs = corr_obs
        if done:
            self.needs_reset = True
        return corr_obs, sample.reward, done


class AdversaryTask:
    """Trainee: sensor-error agent observing the true state; reward -r_t.

    The frozen protagonist acts deterministically on the corrupted view.
    """

    def __init__(self, env: WindFarmEnv, protagonist: PolicyAgent,
                 bounds: nz.NoiseBounds, audit=None, opponent_label: str = ""):
        self.env = env
        self.protagonist = protagonist
        self.bounds = bounds
        self.audit = audit
        self.opponent_label = opponent_label
        self.needs_reset = True
        self.episode_index = 0
        self.current_obs = None
        self._corr_obs = None
        self._error: nz.SensorErrorState | None = None

    @property
    def action_dim(self) -> int:
        return self.env.n_turbines * nz.N_SIGNALS

    def reset(self):
        true_obs, corr_obs = self.env.reset()
        self._error = nz.SensorErrorState(self.env.n_turbines, self.bounds)
        self.current_obs = true_obs
        self._corr_obs = corr_obs
        self.needs_reset = False
        if self.audit is not None:
            self.audit(self.episode_index, self.opponent_label)
        self.episode_index += 1
        return true_obs

    def step(self, raw_action: np.ndarray):
        requested = nz.scale_adversary_output(raw_action, self.env.n_turbines, self.bounds)
        nz.apply_delta(self._error, requested, self.bounds)
        mean = nets.forward(self.protagonist.actor, self._corr_obs)
        delta = np.clip(mean, -1.0, 1.0) * self.env.config.max_yaw_delta
        true_obs, corr_obs, sample, done = self.env.step(delta, self._error.values.copy())
        self.current_obs = true_obs
        self._corr_obs = corr_obs
        if done:
            self.needs_reset = True
        return true_obs, -sample.reward, done


class ToyYawTask:
    """Analytic sanity task: steer a single yaw angle onto a fixed target.

    Observation is (normalized yaw, normalized target); the per-step reward
    is cos^2(yaw - target). The optimum is reached by slewing at the full
    per-step rate and holding, which optimal_mean_reward() evaluates in
    closed form.
    """

    MAX_DELTA = 3.0
    YAW_BOUND = 45.0

    def __init__(self, target_deg: float = 20.0, episode_steps: int = 20,
                 rng: np.random.Generator | None = None):
        self.target = target_deg
        self.episode_steps = episode_steps
        self.needs_reset = True
        self.yaw = 0.0
        self.t = 0
        self.current_obs = None

    @property
    def action_dim(self) -> int:
        return 1

    def _obs(self) -> np.ndarray:
        return np.array([self.yaw / self.YAW_BOUND, self.target / self.YAW_BOUND])

    def reset(self):
        self.yaw = 0.0
        self.t = 0
        self.needs_reset = False
        self.current_obs = self._obs()
        return self.current_obs

    def step(self, raw_action: np.ndarray):
        delta = float(np.clip(raw_action[0], -1.0, 1.0)) * self.MAX_DELTA
        self.yaw = float(np.clip(self.yaw + delta, -self.YAW_BOUND, self.YAW_BOUND))
        self.t += 1
        reward = math.cos(math.radians(self.yaw - self.target)) ** 2
        done = self.t >= self.episode_steps
        if done:
            self.needs_reset = True
        self.current_obs = self._obs()
        return self.current_obs, reward, done

    def optimal_mean_reward(self) -> float:
        """Mean reward of the slew-at-full-rate-then-hold policy, which is
        optimal because cos^2 decreases monotonically with |yaw - target|
        below 90 deg."""
        yaw, total = 0.0, 0.0
        for _ in range(self.episode_steps):
            move = max(-self.MAX_DELTA, min(self.MAX_DELTA, self.target - yaw))
            yaw += move
            total += math.cos(math.radians(yaw - self.target)) ** 2
        return total / self.episode_steps

    def initial_mean_reward(self) -> float:
        """Mean reward of the do-nothing policy (yaw stays at 0)."""
        return math.cos(math.radians(self.target)) ** 2
