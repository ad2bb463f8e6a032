"""Agent kinds: trainable Gaussian policies for the controller and the
sensor-error injector, a deterministic internal-optimizer expert, and the
zero-offset baseline.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import nets
from . import noise as nz
from .env import EnvConfig, denormalize
from .wake import FarmLayout, InflowCondition, effective_speeds, turbine_power

ROLE_PROTAGONIST = "protagonist"
ROLE_ADVERSARY = "adversary"

HIDDEN_SIZES = (128, 128)
ACTOR_OUTPUT_GAIN = 0.01


@dataclass
class PolicyAgent:
    """Actor-critic parameter bundle with a state-independent log-std head."""

    actor: nets.Mlp
    head: nets.GaussianHead
    critic: nets.Mlp
    role: str
    meta: dict = field(default_factory=dict)

    @property
    def obs_dim(self) -> int:
        return self.actor.layer_sizes[0]

    @property
    def action_dim(self) -> int:
        return self.actor.layer_sizes[-1]

    def parameter_arrays(self) -> list[np.ndarray]:
        return (self.actor.parameter_arrays() + [self.head.log_std]
                + self.critic.parameter_arrays())

    def copy(self) -> "PolicyAgent":
        return PolicyAgent(self.actor.copy(), self.head.copy(), self.critic.copy(),
                           self.role, dict(self.meta))


def make_policy_agent(obs_dim: int, action_dim: int, role: str,
                      rng: np.random.Generator,
                      hidden=HIDDEN_SIZES, init_log_std: float = 0.0) -> PolicyAgent:
    actor = nets.init_mlp((obs_dim, *hidden, action_dim), rng, output_gain=ACTOR_OUTPUT_GAIN)
    critic = nets.init_mlp((obs_dim, *hidden, 1), rng, output_gain=1.0)
    head = nets.GaussianHead(np.full(action_dim, init_log_std))
    return PolicyAgent(actor, head, critic, role)


def policy_raw_action(agent: PolicyAgent, obs: np.ndarray,
                      rng: np.random.Generator | None, deterministic: bool):
    """Network-space action and its log density (None when deterministic)."""
    mean = nets.forward(agent.actor, obs)
    if deterministic:
        return mean, None
    return nets.sample_action(mean, agent.head, rng)


def protagonist_act(agent: PolicyAgent, corrupted_obs: np.ndarray,
                    rng: np.random.Generator | None, config: EnvConfig,
                    deterministic: bool = False) -> np.ndarray:
    """Yaw-change command (deg per turbine) from a corrupted observation."""
    raw, _ = policy_raw_action(agent, corrupted_obs, rng, deterministic)
    return np.clip(raw, -1.0, 1.0) * config.max_yaw_delta


def adversary_act(agent: PolicyAgent, true_obs: np.ndarray,
                  rng: np.random.Generator | None, n_turbines: int,
                  bounds: nz.NoiseBounds, deterministic: bool = False) -> np.ndarray:
    """Requested error increments (n_turbines, 4) from the true observation."""
    raw, _ = policy_raw_action(agent, true_obs, rng, deterministic)
    return nz.scale_adversary_output(raw, n_turbines, bounds)


def save_checkpoint(path, agent: PolicyAgent, **metadata) -> None:
    """Versioned JSON checkpoint; floats round-trip bit-exact."""
    record = {
        "version": nets.CHECKPOINT_VERSION,
        "role": agent.role,
        "metadata": {**agent.meta, **metadata},
        "actor": nets.mlp_to_dict(agent.actor),
        "log_std": agent.head.log_std.tolist(),
        "critic": nets.mlp_to_dict(agent.critic),
    }
    with open(path, "w") as f:
        json.dump(record, f)


def load_checkpoint(path) -> PolicyAgent:
    with open(path) as f:
        record = json.load(f)
    if record.get("version") != nets.CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    return PolicyAgent(
        actor=nets.mlp_from_dict(record["actor"]),
        head=nets.GaussianHead(np.array(record["log_std"])),
        critic=nets.mlp_from_dict(record["critic"]),
        role=record["role"],
        meta=record.get("metadata", {}),
    )


class BaselineAgent:
    """Greedy reference controller: zero yaw offset, ignores observations."""

    label = "baseline"

    def act(self, corrupted_obs, env) -> np.ndarray:
        return np.zeros(env.n_turbines)

    def reset(self, env) -> None:
        pass


@dataclass(frozen=True)
class ExpertConfig:
    grid_min: float = -30.0
    grid_max: float = 30.0
    grid_step: float = 1.0

    def grid(self) -> np.ndarray:
        g = np.arange(self.grid_min, self.grid_max + 1e-9, self.grid_step)
        if not np.any(np.isclose(g, 0.0)):
            raise ValueError("yaw search grid must contain 0")
        return g


def steady_farm_power(layout: FarmLayout, inflow: InflowCondition,
                      yaw: np.ndarray) -> float:
    """Total farm power of the steady-state wake model (no advection lag)."""
    spec = layout.spec
    ct = spec.thrust_coefficient(inflow.speed)

    def get_source(j, _lag):
        return float(yaw[j]), ct

    speeds = effective_speeds(layout, inflow, get_source)
    return sum(turbine_power(spec, float(u), float(g)) for u, g in zip(speeds, yaw))


def grid_search_yaw(inflow: InflowCondition, layout: FarmLayout,
                    config: ExpertConfig = ExpertConfig()):
    """Exhaustive steady-state search over upstream yaw offsets.

    Turbines that wake no other turbine are held at 0 deg. Ties are broken
    toward smaller total |yaw|, then toward negative yaw.
    Returns (offsets per turbine, predicted farm power).
    """
    grid = config.grid()
    if grid.size == 0:
        raise ValueError("empty yaw search grid")
    n = layout.n_turbines
    from .wake import flow_vectors
    u_hat, _ = flow_vectors(inflow.direction)
    upstream = []
    for j in range(n):
        for i in range(n):
            if i != j and float((layout.positions[i] - layout.positions[j]) @ u_hat) > 1e-9:
                upstream.append(j)
                break
    best = None
    for combo in itertools.product(grid, repeat=len(upstream)):
        yaw = np.zeros(n)
        for j, g in zip(upstream, combo):
            yaw[j] = g
        power = steady_farm_power(layout, inflow, yaw)
        key = (-power, float(np.abs(yaw).sum()), float(yaw.sum()))
        if best is None or key < best[0]:
            best = (key, yaw, power)
    return best[1], best[2]


class ExpertAgent:
    """Runs the steady-state yaw optimizer on the SENSED inflow each step,
    but actuates the result as offsets from the true reference direction, so
    a confounded optimizer can at worst drive the farm back to baseline.
    """

    label = "expert"

    def __init__(self, layout: FarmLayout, env_config: EnvConfig,
                 expert_config: ExpertConfig = ExpertConfig()):
        self.layout = layout
        self.env_config = env_config
        self.expert_config = expert_config
        self._cache: dict[tuple[float, float], np.ndarray] = {}

    def reset(self, env) -> None:
        self._cache.clear()

    def sensed_inflow(self, corrupted_obs: np.ndarray) -> InflowCondition:
        """Per-turbine mean of the newest frame's speed and direction."""
        c = self.env_config
        n = self.layout.n_turbines
        frame = corrupted_obs.reshape(c.history_length, n, nz.N_SIGNALS)[-1]
        speed = float(np.mean(denormalize(frame[:, nz.SIG_SPEED], nz.SIG_SPEED, c)))
        direction = float(np.mean(denormalize(frame[:, nz.SIG_DIRECTION], nz.SIG_DIRECTION, c)))
        return InflowCondition(max(speed, 0.1), direction)

    def target_offsets(self, corrupted_obs: np.ndarray) -> np.ndarray:
        inflow = self.sensed_inflow(corrupted_obs)
        key = (round(inflow.speed, 6), round(inflow.direction, 6))
        if key not in self._cache:
            offsets, _ = grid_search_yaw(inflow, self.layout, self.expert_config)
            self._cache[key] = offsets
        return self._cache[key]

    def act(self, corrupted_obs: np.ndarray, env) -> np.ndarray:
        target = self.target_offsets(corrupted_obs)
        delta = target - env.agent_yaw
        return np.clip(delta, -self.env_config.max_yaw_delta, self.env_config.max_yaw_delta)
