"""Command-line entry point: train, gauntlet, trace.

Exit codes: 0 success, 1 user error (bad config, bad paths), 2 internal
error. Output directories are never silently overwritten; pass --force to
reuse a non-empty directory.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from . import noise as nz
from .agents import BaselineAgent, ExpertAgent, load_checkpoint
from .config import (ConfigError, RunConfig, TOOL_VERSION, config_hash,
                     load_config)
from .env import WindFarmEnv
from .gauntlet import (PolicyProtagonist, StandardEpisodes, build_matrix,
                       make_adversary_source, run_episode, save_matrix,
                       summarize, write_matrix_table, write_summary)
from .schedules import Zoo, run_schedule
from .wake import (InflowCondition, flow_field_snapshot, two_turbine_layout,
                   write_snapshot)


class UserError(Exception):
    pass


def _check_out_dir(path: str, force: bool) -> None:
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise UserError(f"output directory {path} is not empty (use --force)")
    os.makedirs(path, exist_ok=True)


def _load_run_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise UserError(f"config file not found: {path}")
    try:
        return load_config(path)
    except ConfigError as e:
        raise UserError(str(e)) from e


def cmd_train(args) -> int:
    config = _load_run_config(args.config)
    if args.seed is not None:
        import dataclasses
        config = dataclasses.replace(config, seed=args.seed)
    _check_out_dir(args.out, args.force)
    run_schedule(config, args.out)
    print(f"run complete: {args.out} (config hash {config_hash(config)})")
    return 0


def _gauntlet_axes(run_dirs, config: RunConfig, include_expert: bool,
                   layout):
    protagonists = []
    adversaries = []
    for run_dir in run_dirs:
        name = os.path.basename(os.path.normpath(run_dir))
        zoo = Zoo(run_dir)
        for i in zoo.indices("protagonist"):
            agent = zoo.load("protagonist", i)
            protagonists.append((f"{name}/p{i}", PolicyProtagonist(agent, f"{name}/p{i}")))
        for i in zoo.indices("adversary"):
            agent = zoo.load("adversary", i)
            adversaries.append((f"{name}/a{i}", (f"{name}/a{i}", agent)))
    if include_expert:
        protagonists.append(("expert", ExpertAgent(layout, config.env, config.expert)))
    protagonists.append(("baseline", BaselineAgent()))
    adversaries.append(("clean", "clean"))
    adversaries.append(("procedural", "procedural"))
    return protagonists, adversaries


def cmd_gauntlet(args) -> int:
    for run_dir in args.run:
        if not os.path.isdir(run_dir):
            raise UserError(f"run directory not found: {run_dir}")
    cfg_path = args.config or os.path.join(args.run[0], "config.json")
    config = _load_run_config(cfg_path)
    _check_out_dir(args.out, args.force)
    layout = two_turbine_layout(config.turbine, config.spacing_diameters)
    protagonists, adversaries = _gauntlet_axes(args.run, config, True, layout)
    episodes = StandardEpisodes(base_seed=args.seed if args.seed is not None
                                else config.eval_seed)
    matrix = build_matrix(protagonists, adversaries, episodes, config.env,
                          layout, config.noise,
                          meta={"config_hash": config_hash(config),
                                "tool_version": TOOL_VERSION,
                                "eval_seed": episodes.base_seed})
    save_matrix(os.path.join(args.out, "matrix.json"), matrix)
    write_matrix_table(os.path.join(args.out, "matrix.csv"), matrix)
    trained_p = [p for p, _ in protagonists if p not in ("expert", "baseline")]
    trained_a = [a for a, _ in adversaries if a not in ("clean", "procedural")]
    if trained_p and trained_a:
        series = summarize(matrix, trained_p, trained_a)
        write_summary(os.path.join(args.out, "summary.csv"), series)
    print(f"gauntlet complete: {len(matrix.protagonist_labels)} x "
          f"{len(matrix.adversary_labels)} cells -> {args.out}")
    return 0


def _load_protagonist(spec: str, config: RunConfig, layout):
    if spec == "baseline":
        return BaselineAgent()
    if spec == "expert":
        return ExpertAgent(layout, config.env, config.expert)
    if not os.path.exists(spec):
        raise UserError(f"protagonist checkpoint not found: {spec}")
    return PolicyProtagonist(load_checkpoint(spec), os.path.basename(spec))


def _load_adversary_spec(spec: str):
    if spec in ("clean", "procedural"):
        return spec
    if not os.path.exists(spec):
        raise UserError(f"adversary checkpoint not found: {spec}")
    return (os.path.basename(spec), load_checkpoint(spec))


def cmd_trace(args) -> int:
    config = _load_run_config(args.config)
    _check_out_dir(args.out, args.force)
    layout = two_turbine_layout(config.turbine, config.spacing_diameters)
    protagonist = _load_protagonist(args.protagonist, config, layout)
    adv_spec = _load_adversary_spec(args.adversary)
    try:
        speed, direction = (float(x) for x in args.inflow.split(","))
    except ValueError:
        raise UserError(f"--inflow must be 'speed,direction', got {args.inflow!r}")
    inflow = InflowCondition(speed, direction)
    seed = args.seed if args.seed is not None else config.eval_seed
    env = WindFarmEnv(config.env, layout, seed)
    opponent = make_adversary_source(adv_spec, config.noise,
                                    lambda: np.random.default_rng(seed + 1000))
    rewards, rows = run_episode(env, protagonist, opponent, inflow, record=True)
    trace_path = os.path.join(args.out, "trace.csv")
    _write_trace(trace_path, rows, env.n_turbines, config)
    if args.snapshot:
        grid = _snapshot_grid(layout)
        speeds = flow_field_snapshot(env._agent_track, layout, inflow, grid)
        write_snapshot(os.path.join(args.out, "flow_snapshot.csv"), grid, speeds)
    print(f"trace complete: {len(rows)} steps, mean reward {rewards.mean():.4f}"
          f" -> {trace_path}")
    return 0


def _write_trace(path, rows, n_turbines: int, config: RunConfig) -> None:
    bias = config.noise.max_bias
    cols = ["time", "reward"]
    for i in range(n_turbines):
        for kind in ("true", "sensed", "eps"):
            for sig in nz.SIGNAL_NAMES:
                cols.append(f"{kind}_{sig}_t{i}")
    with open(path, "w") as f:
        f.write("# config_hash=%s tool_version=%s max_bias=%s\n"
                % (config_hash(config), TOOL_VERSION, list(bias)))
        f.write(",".join(cols) + "\n")
        for row in rows:
            vals = [repr(row["time"]), repr(row["reward"])]
            for i in range(n_turbines):
                for kind in ("true", "sensed", "eps"):
                    vals.extend(repr(float(row[kind][i, s]))
                                for s in range(nz.N_SIGNALS))
            f.write(",".join(vals) + "\n")


def _snapshot_grid(layout) -> np.ndarray:
    lo = layout.positions.min(axis=0) - 2 * layout.spec.rotor_diameter
    hi = layout.positions.max(axis=0) + 6 * layout.spec.rotor_diameter
    xs = np.linspace(lo[0], hi[0], 80)
    ys = np.linspace(lo[1] - 2 * layout.spec.rotor_diameter,
                     hi[1] + 2 * layout.spec.rotor_diameter, 40)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yawarena",
        description="Adversarial co-training arena for wind-farm yaw control")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training schedule")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--workers", type=int, default=1)
    p_train.add_argument("--force", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_g = sub.add_parser("gauntlet", help="cross-evaluate checkpoints")
    p_g.add_argument("--run", action="append", required=True,
                     help="run directory (repeatable)")
    p_g.add_argument("--config", default=None,
                     help="defaults to the first run's config.json")
    p_g.add_argument("--out", required=True)
    p_g.add_argument("--seed", type=int, default=None)
    p_g.add_argument("--workers", type=int, default=1)
    p_g.add_argument("--force", action="store_true")
    p_g.set_defaults(func=cmd_gauntlet)

    p_t = sub.add_parser("trace", help="record one evaluation episode")
    p_t.add_argument("--config", required=True)
    p_t.add_argument("--protagonist", required=True,
                     help="checkpoint path, 'baseline', or 'expert'")
    p_t.add_argument("--adversary", required=True,
                     help="checkpoint path, 'clean', or 'procedural'")
    p_t.add_argument("--inflow", default="6.5,270")
    p_t.add_argument("--seed", type=int, default=None)
    p_t.add_argument("--out", required=True)
    p_t.add_argument("--snapshot", action="store_true")
    p_t.add_argument("--force", action="store_true")
    p_t.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UserError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
