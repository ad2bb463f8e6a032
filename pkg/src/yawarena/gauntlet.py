"""Cross-evaluation gauntlet: every controller against every sensor-error
source over a fixed set of standardized inflow episodes.

All policies act deterministically (Gaussian mean), so a cell is a pure
function of the checkpoints, the episode set, and the evaluation seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import noise as nz
from .agents import (BaselineAgent, ExpertAgent, ExpertConfig, PolicyAgent,
                     load_checkpoint)
from .config import RunConfig, TOOL_VERSION
from .env import EnvConfig, WindFarmEnv
from .tasks import CleanOpponent, PolicyOpponent, ProceduralOpponent
from .wake import FarmLayout, InflowCondition, two_turbine_layout

STANDARD_INFLOWS = (
    (6.0, 267.0),
    (6.25, 268.5),
    (6.5, 270.0),
    (6.75, 271.5),
    (7.0, 273.0),
)


@dataclass(frozen=True)
class StandardEpisodes:
    """Five fixed inflow conditions with fixed per-episode seeds."""

    inflows: tuple = STANDARD_INFLOWS
    base_seed: int = 12345
    version: int = 1

    def episodes(self):
        for k, (speed, direction) in enumerate(self.inflows):
            yield InflowCondition(speed, direction), self.base_seed + k


@dataclass
class EvalCell:
    mean: float
    stderr: float
    scores: list[float]


@dataclass
class EvalMatrix:
    protagonist_labels: list[str]
    adversary_labels: list[str]
    cells: dict  # (prot_label, adv_label) -> EvalCell
    meta: dict = field(default_factory=dict)

    def cell(self, prot: str, adv: str) -> EvalCell:
        return self.cells[(prot, adv)]

    def row(self, prot: str) -> list[EvalCell]:
        return [self.cells[(prot, a)] for a in self.adversary_labels]

    def column(self, adv: str) -> list[EvalCell]:
        return [self.cells[(p, adv)] for p in self.protagonist_labels]


class PolicyProtagonist:
    """Deterministic wrapper around a trained controller checkpoint."""

    def __init__(self, agent: PolicyAgent, label: str):
        from . import nets
        self._nets = nets
        self.agent = agent
        self.label = label

    def reset(self, env) -> None:
        pass

    def act(self, corrupted_obs, env) -> np.ndarray:
        mean = self._nets.forward(self.agent.actor, corrupted_obs)
        return np.clip(mean, -1.0, 1.0) * env.config.max_yaw_delta


def make_adversary_source(spec, bounds: nz.NoiseBounds, rng_factory):
    """spec: 'clean' | 'procedural' | (label, PolicyAgent)."""
    if spec == "clean":
        return CleanOpponent()
    if spec == "procedural":
        return ProceduralOpponent(bounds, rng_factory())
    label, agent = spec
    return PolicyOpponent(agent, bounds, label)


def run_episode(env: WindFarmEnv, protagonist, opponent,
                inflow: InflowCondition, record: bool = False):
    """One deterministic evaluation episode; returns (rewards, trace rows)."""
    true_obs, corr_obs = env.reset(inflow)
    protagonist.reset(env)
    opponent.reset(env)
    rewards = []
    rows = [] if record else None
    while not env.done:
        delta = protagonist.act(corr_obs, env)
        eps = opponent.compute_eps(true_obs, env)
        true_obs, corr_obs, sample, done = env.step(delta, eps)
        rewards.append(sample.reward)
        if record:
            frame = env._true_frames[-1]
            sensed = env._corr_frames[-1]
            rows.append({
                "time": env.step_count * env.config.control_dt,
                "reward": sample.reward,
                "true": frame.copy(),
                "sensed": sensed.copy(),
                "eps": np.zeros_like(frame) if eps is None else np.array(eps),
            })
    return np.array(rewards), rows


def evaluate_pair(protagonist, adversary_spec, episodes: StandardEpisodes,
                  env_config: EnvConfig, layout: FarmLayout,
                  bounds: nz.NoiseBounds) -> EvalCell:
    """Per-episode score = mean reward over the episode; the cell is the
    mean and standard error (sample std / sqrt(n)) over episodes."""
    scores = []
    for inflow, seed in episodes.episodes():
        env = WindFarmEnv(env_config, layout, seed)
        opponent = make_adversary_source(
            adversary_spec, bounds, lambda s=seed: np.random.default_rng(s + 1000))
        rewards, _ = run_episode(env, protagonist, opponent, inflow)
        scores.append(float(rewards.mean()))
    arr = np.array(scores)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return EvalCell(float(arr.mean()), stderr, scores)


def build_matrix(protagonists, adversaries, episodes: StandardEpisodes,
                 env_config: EnvConfig, layout: FarmLayout,
                 bounds: nz.NoiseBounds, meta: dict | None = None) -> EvalMatrix:
    """protagonists: list of (label, agent-with-act/reset); adversaries:
    list of (label, spec accepted by make_adversary_source)."""
    if not protagonists or not adversaries:
        raise ValueError("matrix axes must be non-empty")
    cells = {}
    for p_label, prot in protagonists:
        for a_label, a_spec in adversaries:
            cells[(p_label, a_label)] = evaluate_pair(
                prot, a_spec, episodes, env_config, layout, bounds)
    return EvalMatrix([p for p, _ in protagonists], [a for a, _ in adversaries],
                      cells, meta or {})


def summarize(matrix: EvalMatrix, trained_protagonists: list[str],
              trained_adversaries: list[str], expert_label: str = "expert"):
    """The six summary series: diagonal, expert row, clean column,
    procedural column, protagonist row means, adversary column means.
    Row/column means run over the trained opponents only."""
    n = min(len(trained_protagonists), len(trained_adversaries))
    series = {
        "diagonal": [matrix.cell(trained_protagonists[i], trained_adversaries[i]).mean
                     for i in range(n)],
        "expert_vs_adversary": [matrix.cell(expert_label, a).mean
                                for a in trained_adversaries],
        "protagonist_vs_clean": [matrix.cell(p, "clean").mean
                                 for p in trained_protagonists],
        "protagonist_vs_procedural": [matrix.cell(p, "procedural").mean
                                      for p in trained_protagonists],
        "protagonist_row_mean": [
            float(np.mean([matrix.cell(p, a).mean for a in trained_adversaries]))
            for p in trained_protagonists],
        "adversary_column_mean": [
            float(np.mean([matrix.cell(p, a).mean for p in trained_protagonists]))
            for a in trained_adversaries],
    }
    return series


def select_best_protagonist(series: dict, trained_protagonists: list[str]) -> str:
    """Most robust controller: argmax of the row-mean series."""
    i = int(np.argmax(series["protagonist_row_mean"]))
    return trained_protagonists[i]


def select_best_adversary(series: dict, trained_adversaries: list[str]) -> str:
    """Most formidable error agent: argmin of the column-mean series."""
    i = int(np.argmin(series["adversary_column_mean"]))
    return trained_adversaries[i]


def save_matrix(path, matrix: EvalMatrix) -> None:
    doc = {
        "tool_version": TOOL_VERSION,
        "meta": matrix.meta,
        "protagonists": matrix.protagonist_labels,
        "adversaries": matrix.adversary_labels,
        "cells": {
            f"{p}|{a}": {"mean": c.mean, "stderr": c.stderr, "scores": c.scores}
            for (p, a), c in matrix.cells.items()
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def load_matrix(path) -> EvalMatrix:
    with open(path) as f:
        doc = json.load(f)
    cells = {}
    for key, c in doc["cells"].items():
        p, a = key.split("|")
        cells[(p, a)] = EvalCell(c["mean"], c["stderr"], c["scores"])
    return EvalMatrix(doc["protagonists"], doc["adversaries"], cells,
                      doc.get("meta", {}))


def write_matrix_table(path, matrix: EvalMatrix) -> None:
    """Flat delimited table (protagonist, adversary, mean, stderr) for
    heatmap plotting."""
    with open(path, "w") as f:
        f.write("protagonist,adversary,mean,stderr\n")
        for p in matrix.protagonist_labels:
            for a in matrix.adversary_labels:
                c = matrix.cell(p, a)
                f.write(f"{p},{a},{c.mean!r},{c.stderr!r}\n")


def write_summary(path, series: dict) -> None:
    with open(path, "w") as f:
        f.write("series,index,value\n")
        for name, values in series.items():
            for i, v in enumerate(values):
                f.write(f"{name},{i},{v!r}\n")
