"""Proximal Policy Optimization with manual analytic gradients.

Rollouts are collected from a pool of tasks stepped in lockstep; updates
run clipped-surrogate minibatch SGD (Adam) over the flattened buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets
from .agents import PolicyAgent


class UpdateDivergedError(RuntimeError):
    """Non-finite loss encountered during a PPO update."""


@dataclass(frozen=True)
class PpoConfig:
    learning_rate: float = 3e-4
    batch_size: int = 64
    gamma: float = 0.99
    steps_per_iteration: int = 250_000
    rollout_length: int = 512
    n_envs: int = 6
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    update_epochs: int = 10
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if (self.rollout_length * self.n_envs) % self.batch_size != 0:
            raise ValueError("rollout_length * n_envs must be divisible by batch_size")

    @property
    def buffer_size(self) -> int:
        return self.rollout_length * self.n_envs


class RolloutBuffer:
    """Fixed-capacity (T, n_envs) transition store."""

    def __init__(self, rollout_length: int, n_envs: int, obs_dim: int, action_dim: int):
        T, E = rollout_length, n_envs
        self.rollout_length = rollout_length
        self.n_envs = n_envs
        self.observations = np.zeros((T, E, obs_dim))
        self.actions = np.zeros((T, E, action_dim))
        self.log_probs = np.zeros((T, E))
        self.rewards = np.zeros((T, E))
        self.values = np.zeros((T, E))
        self.dones = np.zeros((T, E), dtype=bool)
        self.bootstrap_values = np.zeros(E)
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos == self.rollout_length

    def add(self, obs, actions, log_probs, rewards, values, dones):
        t = self.pos
        self.observations[t] = obs
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.rewards[t] = rewards
        self.values[t] = values
        self.dones[t] = dones
        self.pos += 1

    def clear(self):
        self.pos = 0


def collect_rollout(agent: PolicyAgent, tasks, config: PpoConfig,
                    rng: np.random.Generator,
                    buffer: RolloutBuffer | None = None) -> RolloutBuffer:
    """Step every task for rollout_length agent steps, sampling from the
    trainee policy. Tasks auto-reset on episode end. A task provides
    reset(), step(raw_action) -> (obs, reward, done), and current_obs."""
    if buffer is None:
        buffer = RolloutBuffer(config.rollout_length, len(tasks),
                               agent.obs_dim, agent.action_dim)
    buffer.clear()
    for task in tasks:
        if task.needs_reset:
            task.reset()
    for _ in range(config.rollout_length):
        obs = np.array([t.current_obs for t in tasks])
        mean, _ = nets.forward_batch(agent.actor, obs)
        noise = rng.standard_normal(mean.shape)
        actions = mean + np.exp(agent.head.log_std) * noise
        log_probs = nets.gaussian_log_prob(actions, mean, agent.head.log_std)
        values, _ = nets.forward_batch(agent.critic, obs)
        rewards = np.empty(len(tasks))
        dones = np.empty(len(tasks), dtype=bool)
        for i, task in enumerate(tasks):
            _, r, d = task.step(actions[i])
            rewards[i] = r
            dones[i] = d
            if d:
                task.reset()
        buffer.add(obs, actions, log_probs, rewards, values[:, 0], dones)
    final_obs = np.array([t.current_obs for t in tasks])
    v, _ = nets.forward_batch(agent.critic, final_obs)
    buffer.bootstrap_values = v[:, 0]
    return buffer


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                bootstrap_values: np.ndarray, gamma: float, lam: float):
    """Recursive generalized advantage estimation over (T, E) arrays.

    Returns raw (unnormalized) advantages and returns = advantages + values.
    """
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_adv = np.zeros(rewards.shape[1])
    next_values = bootstrap_values
    for t in reversed(range(T)):
        not_done = 1.0 - dones[t].astype(np.float64)
        delta = rewards[t] + gamma * next_values * not_done - values[t]
        next_adv = delta + gamma * lam * not_done * next_adv
        adv[t] = next_adv
        next_values = values[t]
    return adv, adv + values


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    clip_fraction: float
    approx_kl: float
    mean_episode_reward: float


def ppo_update(agent: PolicyAgent, buffer: RolloutBuffer, config: PpoConfig,
               optimizer: nets.Adam, rng: np.random.Generator) -> UpdateStats:
    """Clipped-surrogate update over the full buffer; mutates the agent's
    parameters through the supplied optimizer."""
    if not buffer.full:
        raise ValueError("buffer must be full before an update")
    N = config.buffer_size
    obs = buffer.observations.reshape(N, -1)
    actions = buffer.actions.reshape(N, -1)
    old_log_probs = buffer.log_probs.reshape(N)
    adv, returns = compute_gae(buffer.rewards, buffer.values, buffer.dones,
                               buffer.bootstrap_values, config.gamma, config.gae_lambda)
    adv = adv.reshape(N)
    returns = returns.reshape(N)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    eps = config.clip_range
    action_dim = agent.action_dim
    n_actor = len(agent.actor.parameter_arrays()) + 1  # + log_std
    pl_sum = vl_sum = clip_sum = kl_sum = 0.0
    n_batches = 0

    for _ in range(config.update_epochs):
        order = rng.permutation(N)
        for start in range(0, N, config.batch_size):
            idx = order[start:start + config.batch_size]
            B = idx.size
            o, a = obs[idx], actions[idx]
            A, ret, old_lp = adv[idx], returns[idx], old_log_probs[idx]

            mean, actor_cache = nets.forward_batch(agent.actor, o)
            std = np.exp(agent.head.log_std)
            z = (a - mean) / std
            new_lp = nets.gaussian_log_prob(a, mean, agent.head.log_std)
            ratio = np.exp(new_lp - old_lp)
            surr1 = ratio * A
            surr2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * A
            policy_loss = -np.mean(np.minimum(surr1, surr2))
            # gradient flows through the unclipped branch only where it is
            # the active minimum
            passthrough = surr1 <= surr2
            dlp = np.where(passthrough, -ratio * A / B, 0.0)
            d_mean = dlp[:, None] * (z / std)
            d_log_std = np.sum(dlp[:, None] * (z * z - 1.0), axis=0)
            actor_grads = nets.backward_batch(agent.actor, actor_cache, d_mean)

            v, critic_cache = nets.forward_batch(agent.critic, o)
            v = v[:, 0]
            value_loss = float(np.mean((v - ret) ** 2))
            d_v = (config.value_coef * 2.0 * (v - ret) / B)[:, None]
            critic_grads = nets.backward_batch(agent.critic, critic_cache, d_v)

            if not (math.isfinite(policy_loss) and math.isfinite(value_loss)):
                raise UpdateDivergedError(
                    f"non-finite loss: policy={policy_loss} value={value_loss}")

            grads = []
            for gw, gb in zip(actor_grads.weights, actor_grads.biases):
                grads.extend([gw, gb])
            grads.append(d_log_std)
            for gw, gb in zip(critic_grads.weights, critic_grads.biases):
                grads.extend([gw, gb])
            nets.clip_grad_norm(grads, config.max_grad_norm)
            optimizer.step(grads)

            pl_sum += float(policy_loss)
            vl_sum += value_loss
            clip_sum += float(np.mean(np.abs(ratio - 1.0) > eps))
            kl_sum += float(np.mean(old_lp - new_lp))
            n_batches += 1

    ep_reward = float(buffer.rewards.mean())
    return UpdateStats(pl_sum / n_batches, vl_sum / n_batches,
                       clip_sum / n_batches, kl_sum / n_batches, ep_reward)


def make_optimizer(agent: PolicyAgent, config: PpoConfig) -> nets.Adam:
    return nets.Adam(agent.parameter_arrays(), lr=config.learning_rate)


def train_iteration(agent: PolicyAgent, tasks, config: PpoConfig,
                    rng: np.random.Generator,
                    log=None) -> list[UpdateStats]:
    """Alternate rollout collection and updates until steps_per_iteration
    total agent steps (summed over tasks) are consumed."""
    optimizer = make_optimizer(agent, config)
    buffer = RolloutBuffer(config.rollout_length, len(tasks),
                           agent.obs_dim, agent.action_dim)
    stats_log: list[UpdateStats] = []
    steps = 0
    while steps < config.steps_per_iteration:
        collect_rollout(agent, tasks, config, rng, buffer)
        steps += config.buffer_size
        stats = ppo_update(agent, buffer, config, optimizer, rng)
        stats_log.append(stats)
        if log is not None:
            log(steps, stats)
    agent.meta["env_steps"] = agent.meta.get("env_steps", 0) + steps
    return stats_log
