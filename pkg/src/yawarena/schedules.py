"""Co-training schedules and opponent-zoo bookkeeping.

Every schedule writes a run directory: the exact config used, immutable
checkpoint zoos (protagonists/ and adversaries/), an append-only training
log, and an opponent-provenance audit log recording which opponent every
training episode was played against.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets
from . import noise as nz
from .agents import (PolicyAgent, make_policy_agent, save_checkpoint,
                     load_checkpoint)
from .config import RunConfig, config_hash, save_config
from .env import WindFarmEnv
from .ppo import (PpoConfig, RolloutBuffer, compute_gae, make_optimizer,
                  ppo_update, train_iteration)
from .tasks import (AdversaryTask, CleanOpponent, PolicyOpponent, PoolOpponent,
                    ProceduralOpponent, ProtagonistTask)
from .wake import two_turbine_layout


class Zoo:
    """Ordered, immutable checkpoint collections for one run directory."""

    def __init__(self, root: str):
        self.root = root
        self.prot_dir = os.path.join(root, "protagonists")
        self.adv_dir = os.path.join(root, "adversaries")
        os.makedirs(self.prot_dir, exist_ok=True)
        os.makedirs(self.adv_dir, exist_ok=True)

    def _path(self, role: str, index: int) -> str:
        d = self.prot_dir if role == "protagonist" else self.adv_dir
        prefix = "p" if role == "protagonist" else "a"
        return os.path.join(d, f"{prefix}{index:03d}.json")

    def add(self, role: str, index: int, agent: PolicyAgent, **meta) -> str:
        path = self._path(role, index)
        if os.path.exists(path):
            raise FileExistsError(f"zoo checkpoint already exists: {path}")
        save_checkpoint(path, agent, iteration=index, **meta)
        return path

    def load(self, role: str, index: int) -> PolicyAgent:
        return load_checkpoint(self._path(role, index))

    def indices(self, role: str) -> list[int]:
        d = self.prot_dir if role == "protagonist" else self.adv_dir
        out = []
        for name in sorted(os.listdir(d)):
            if name.endswith(".json"):
                out.append(int(name[1:-5]))
        return out


class RunLogs:
    """Append-only delimited training and audit logs."""

    def __init__(self, root: str):
        self.train_path = os.path.join(root, "train_log.csv")
        self.audit_path = os.path.join(root, "audit_log.csv")
        for path, header in ((self.train_path,
                              "role,iteration,steps,policy_loss,value_loss,"
                              "clip_fraction,approx_kl,mean_reward"),
                             (self.audit_path,
                              "role,iteration,env_id,episode,opponent")):
            if not os.path.exists(path):
                with open(path, "w") as f:
                    f.write(header + "\n")

    def log_train(self, role, iteration, steps, stats):
        with open(self.train_path, "a") as f:
            f.write(f"{role},{iteration},{steps},{stats.policy_loss!r},"
                    f"{stats.value_loss!r},{stats.clip_fraction!r},"
                    f"{stats.approx_kl!r},{stats.mean_episode_reward!r}\n")

    def log_audit(self, role, iteration, env_id, episode, opponent):
        with open(self.audit_path, "a") as f:
            f.write(f"{role},{iteration},{env_id},{episode},{opponent}\n")

    def read_audit(self) -> list[dict]:
        with open(self.audit_path) as f:
            return list(csv.DictReader(f))


@dataclass
class ScheduleContext:
    config: RunConfig
    out_dir: str
    zoo: Zoo
    logs: RunLogs
    seed_root: np.random.SeedSequence

    def rng(self, *key) -> np.random.Generator:
        """Deterministic named stream derived from the master seed."""
        tokens = [self.config.seed] + [hash_token(k) for k in key]
        return np.random.default_rng(np.random.SeedSequence(tokens))


def hash_token(k) -> int:
    if isinstance(k, int):
        return k
    return int.from_bytes(str(k).encode(), "little") % (2 ** 63)


def prepare_run(config: RunConfig, out_dir: str) -> ScheduleContext:
    os.makedirs(out_dir, exist_ok=True)
    save_config(os.path.join(out_dir, "config.json"), config)
    with open(os.path.join(out_dir, "config_hash.txt"), "w") as f:
        f.write(config_hash(config) + "\n")
    return ScheduleContext(config, out_dir, Zoo(out_dir), RunLogs(out_dir),
                           np.random.SeedSequence(config.seed))


def _layout(config: RunConfig):
    return two_turbine_layout(config.turbine, config.spacing_diameters)


def _make_envs(ctx: ScheduleContext, role: str, iteration: int, n: int):
    layout = _layout(ctx.config)
    return [WindFarmEnv(ctx.config.env, layout,
                        ctx.rng("env", role, iteration, i)) for i in range(n)]


def _fresh_agent(ctx: ScheduleContext, role: str, iteration: int,
                 obs_dim: int, action_dim: int) -> PolicyAgent:
    rng = ctx.rng("init", role, iteration)
    agent = make_policy_agent(obs_dim, action_dim, role, rng)
    agent.meta.update(schedule=ctx.config.schedule, iteration=iteration,
                      training_seed=ctx.config.seed)
    return agent


def _train_protagonist(ctx: ScheduleContext, iteration: int, opponent_factory,
                       start_from: PolicyAgent | None = None) -> PolicyAgent:
    cfg = ctx.config
    envs = _make_envs(ctx, "protagonist", iteration, cfg.ppo.n_envs)
    obs_dim = envs[0].obs_dim
    if start_from is None:
        agent = _fresh_agent(ctx, "protagonist", iteration, obs_dim, envs[0].n_turbines)
    else:
        agent = start_from
    tasks = []
    for i, env in enumerate(envs):
        audit = (lambda i: lambda ep, label: ctx.logs.log_audit(
            "protagonist", iteration, i, ep, label))(i)
        tasks.append(ProtagonistTask(env, opponent_factory(i), audit=audit))
    rng = ctx.rng("rollout", "protagonist", iteration)
    train_iteration(agent, tasks, cfg.ppo, rng,
                    log=lambda steps, st: ctx.logs.log_train(
                        "protagonist", iteration, steps, st))
    return agent


def _train_adversary(ctx: ScheduleContext, iteration: int,
                     frozen_protagonist: PolicyAgent) -> PolicyAgent:
    cfg = ctx.config
    envs = _make_envs(ctx, "adversary", iteration, cfg.ppo.n_envs)
    obs_dim = envs[0].obs_dim
    action_dim = envs[0].n_turbines * nz.N_SIGNALS
    agent = _fresh_agent(ctx, "adversary", iteration, obs_dim, action_dim)
    opp_label = f"protagonist_{iteration}"
    tasks = []
    for i, env in enumerate(envs):
        audit = (lambda i: lambda ep, label: ctx.logs.log_audit(
            "adversary", iteration, i, ep, label))(i)
        tasks.append(AdversaryTask(env, frozen_protagonist, cfg.noise,
                                   audit=audit, opponent_label=opp_label))
    rng = ctx.rng("rollout", "adversary", iteration)
    train_iteration(agent, tasks, cfg.ppo, rng,
                    log=lambda steps, st: ctx.logs.log_train(
                        "adversary", iteration, steps, st))
    return agent


def arms_race_run(config: RunConfig, out_dir: str) -> Zoo:
    """Sequential generations; each trainee faces only the immediately
    previous opponent, prior opponents are discarded."""
    ctx = prepare_run(config, out_dir)
    prev_adversary = None
    prev_protagonist = None
    for n in range(config.n_iterations):
        if prev_adversary is None:
            opp_factory = lambda i: ProceduralOpponent(
                config.noise, ctx.rng("procedural", "protagonist", n, i))
        else:
            adv = prev_adversary
            opp_factory = lambda i, adv=adv, n=n: PolicyOpponent(
                adv, config.noise, f"adversary_{n - 1}")
        start = prev_protagonist.copy() if (config.warm_start and prev_protagonist) else None
        protagonist = _train_protagonist(ctx, n, opp_factory, start_from=start)
        ctx.zoo.add("protagonist", n, protagonist)
        adversary = _train_adversary(ctx, n, protagonist)
        ctx.zoo.add("adversary", n, adversary)
        prev_adversary = adversary
        prev_protagonist = protagonist
    return ctx.zoo


def ssp_run(config: RunConfig, out_dir: str) -> Zoo:
    """Like the arms race, but the protagonist's opponent is drawn
    uniformly at each episode start from procedural noise plus every prior
    adversary."""
    ctx = prepare_run(config, out_dir)
    adversaries: list[PolicyAgent] = []
    for n in range(config.n_iterations):
        def opp_factory(i, n=n, advs=tuple(adversaries)):
            members = [ProceduralOpponent(config.noise,
                                          ctx.rng("procedural", "protagonist", n, i))]
            members += [PolicyOpponent(a, config.noise, f"adversary_{j}")
                        for j, a in enumerate(advs)]
            return PoolOpponent(members, ctx.rng("pool", n, i))
        protagonist = _train_protagonist(ctx, n, opp_factory)
        ctx.zoo.add("protagonist", n, protagonist)
        adversary = _train_adversary(ctx, n, protagonist)
        ctx.zoo.add("adversary", n, adversary)
        adversaries.append(adversary)
    return ctx.zoo


def procedural_only_run(config: RunConfig, out_dir: str) -> Zoo:
    """Robustness baseline: one protagonist trained against procedural
    noise for the whole budget (n_iterations * steps_per_iteration)."""
    ctx = prepare_run(config, out_dir)
    total = config.ppo.steps_per_iteration * config.n_iterations
    big = replace(config.ppo, steps_per_iteration=total)
    envs = _make_envs(ctx, "protagonist", 0, big.n_envs)
    agent = _fresh_agent(ctx, "protagonist", 0, envs[0].obs_dim, envs[0].n_turbines)
    tasks = []
    for i, env in enumerate(envs):
        audit = (lambda i: lambda ep, label: ctx.logs.log_audit(
            "protagonist", 0, i, ep, label))(i)
        tasks.append(ProtagonistTask(
            env, ProceduralOpponent(config.noise, ctx.rng("procedural", "protagonist", 0, i)),
            audit=audit))
    rng = ctx.rng("rollout", "protagonist", 0)
    train_iteration(agent, tasks, big, rng,
                    log=lambda steps, st: ctx.logs.log_train("protagonist", 0, steps, st))
    ctx.zoo.add("protagonist", 0, agent)
    return ctx.zoo


def selfplay_run(config: RunConfig, out_dir: str) -> Zoo:
    """Concurrent zero-sum co-training in a single environment; each agent
    keeps its own buffer (protagonist r, adversary -r over the same
    trajectories) and updates independently every rollout_length steps."""
    ctx = prepare_run(config, out_dir)
    cfg = config.ppo
    if cfg.n_envs != 1:
        cfg = replace(cfg, n_envs=1, rollout_length=cfg.rollout_length)
    layout = _layout(config)
    env = WindFarmEnv(config.env, layout, ctx.rng("env", "selfplay", 0, 0))
    n_t = env.n_turbines
    obs_dim = env.obs_dim
    protagonist = _fresh_agent(ctx, "protagonist", 0, obs_dim, n_t)
    adversary = _fresh_agent(ctx, "adversary", 0, obs_dim, n_t * nz.N_SIGNALS)
    prot_opt = make_optimizer(protagonist, cfg)
    adv_opt = make_optimizer(adversary, cfg)
    prot_buf = RolloutBuffer(cfg.rollout_length, 1, obs_dim, n_t)
    adv_buf = RolloutBuffer(cfg.rollout_length, 1, obs_dim, n_t * nz.N_SIGNALS)
    rng = ctx.rng("rollout", "selfplay", 0)

    true_obs, corr_obs = env.reset()
    error = nz.SensorErrorState(n_t, config.noise)
    episode = 0
    ctx.logs.log_audit("selfplay", 0, 0, episode, "live")
    steps_total = 0
    snapshot = 0
    target_total = cfg.steps_per_iteration * config.n_iterations
    while snapshot < config.n_iterations:
        for _ in range(cfg.rollout_length):
            p_mean = nets.forward(protagonist.actor, corr_obs)
            p_act, p_lp = nets.sample_action(p_mean, protagonist.head, rng)
            a_mean = nets.forward(adversary.actor, true_obs)
            a_act, a_lp = nets.sample_action(a_mean, adversary.head, rng)
            p_val = float(nets.forward(protagonist.critic, corr_obs)[0])
            a_val = float(nets.forward(adversary.critic, true_obs)[0])
            requested = nz.scale_adversary_output(a_act, n_t, config.noise)
            nz.apply_delta(error, requested, config.noise)
            delta = np.clip(p_act, -1.0, 1.0) * config.env.max_yaw_delta
            prev_corr, prev_true = corr_obs, true_obs
            true_obs, corr_obs, sample, done = env.step(delta, error.values.copy())
            prot_buf.add(prev_corr[None], p_act[None], [p_lp], [sample.reward],
                         [p_val], [done])
            adv_buf.add(prev_true[None], a_act[None], [a_lp], [-sample.reward],
                        [a_val], [done])
            steps_total += 1
            if done:
                true_obs, corr_obs = env.reset()
                error = nz.SensorErrorState(n_t, config.noise)
                episode += 1
                ctx.logs.log_audit("selfplay", 0, 0, episode, "live")
        prot_buf.bootstrap_values = np.array(
            [float(nets.forward(protagonist.critic, corr_obs)[0])])
        adv_buf.bootstrap_values = np.array(
            [float(nets.forward(adversary.critic, true_obs)[0])])
        st_p = ppo_update(protagonist, prot_buf, cfg, prot_opt, rng)
        st_a = ppo_update(adversary, adv_buf, cfg, adv_opt, rng)
        ctx.logs.log_train("protagonist", snapshot, steps_total, st_p)
        ctx.logs.log_train("adversary", snapshot, steps_total, st_a)
        prot_buf.clear()
        adv_buf.clear()
        if steps_total >= (snapshot + 1) * cfg.steps_per_iteration:
            ctx.zoo.add("protagonist", snapshot, protagonist, env_steps=steps_total)
            ctx.zoo.add("adversary", snapshot, adversary, env_steps=steps_total)
            snapshot += 1
    return ctx.zoo


SCHEDULE_RUNNERS = {
    "arms_race": arms_race_run,
    "ssp": ssp_run,
    "self_play": selfplay_run,
    "procedural_only": procedural_only_run,
}


def run_schedule(config: RunConfig, out_dir: str) -> Zoo:
    return SCHEDULE_RUNNERS[config.schedule](config, out_dir)
