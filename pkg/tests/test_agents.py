import json

import numpy as np
import pytest

from yawarena.agents import (ACTOR_OUTPUT_GAIN, ROLE_ADVERSARY,
                             ROLE_PROTAGONIST, BaselineAgent, ExpertAgent,
                             ExpertConfig, adversary_act, grid_search_yaw,
                             load_checkpoint, make_policy_agent,
                             protagonist_act, save_checkpoint,
                             steady_farm_power)
from yawarena.env import EnvConfig, WindFarmEnv
from yawarena.noise import NoiseBounds
from yawarena.wake import InflowCondition, two_turbine_layout

CFG = EnvConfig()
LAYOUT = two_turbine_layout()
BOUNDS = NoiseBounds()


class TestPolicyAgent:
    def test_near_zero_initial_actions(self):
        """Small output gain keeps the initial deterministic policy close
        to the greedy baseline."""
        agent = make_policy_agent(88, 2, ROLE_PROTAGONIST, np.random.default_rng(0))
        obs = np.random.default_rng(1).uniform(-1, 1, 88)
        a = protagonist_act(agent, obs, None, CFG, deterministic=True)
        assert np.all(np.abs(a) < 0.5)

    def test_protagonist_action_scaling(self):
        agent = make_policy_agent(88, 2, ROLE_PROTAGONIST, np.random.default_rng(0))
        obs = np.zeros(88)
        for _ in range(20):
            a = protagonist_act(agent, obs, np.random.default_rng(0), CFG)
            assert np.all(np.abs(a) <= CFG.max_yaw_delta)

    def test_adversary_action_scaling(self):
        agent = make_policy_agent(88, 8, ROLE_ADVERSARY, np.random.default_rng(0))
        obs = np.zeros(88)
        for seed in range(20):
            req = adversary_act(agent, obs, np.random.default_rng(seed), 2, BOUNDS)
            assert req.shape == (2, 4)
            assert np.all(np.abs(req) <= BOUNDS.step_limit)

    def test_deterministic_mode_is_mean(self):
        agent = make_policy_agent(88, 2, ROLE_PROTAGONIST, np.random.default_rng(3))
        obs = np.random.default_rng(4).uniform(-1, 1, 88)
        a = protagonist_act(agent, obs, None, CFG, deterministic=True)
        b = protagonist_act(agent, obs, None, CFG, deterministic=True)
        assert np.array_equal(a, b)

    def test_checkpoint_round_trip_bit_exact(self, tmp_path):
        agent = make_policy_agent(88, 2, ROLE_PROTAGONIST, np.random.default_rng(5))
        agent.head.log_std[:] = [-0.123456789012345, 0.7]
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, agent, generation=3)
        back = load_checkpoint(path)
        for a, b in zip(agent.parameter_arrays(), back.parameter_arrays()):
            assert np.array_equal(a, b)
        assert back.role == ROLE_PROTAGONIST
        assert back.meta["generation"] == 3

    def test_checkpoint_version_check(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"version": 999}))
        with pytest.raises(ValueError):
            load_checkpoint(path)


class TestBaseline:
    def test_zero_action_and_zero_reward(self):
        env = WindFarmEnv(seed=0)
        env.reset(InflowCondition(6.5, 270.0))
        agent = BaselineAgent()
        agent.reset(env)
        while not env.done:
            _, c, s, _ = env.step(agent.act(env.corrupted_observation(), env))
            assert s.reward == 0.0
        assert np.all(env.agent_yaw == 0.0)


class TestGridSearch:
    def test_grid_must_contain_zero(self):
        with pytest.raises(ValueError):
            ExpertConfig(grid_min=1.0, grid_max=5.0).grid()

    def test_no_interaction_direction_gives_zero_offsets(self):
        # wind from due north: the east-west pair does not wake each other
        offsets, power = grid_search_yaw(InflowCondition(6.5, 0.0), LAYOUT)
        assert np.array_equal(offsets, np.zeros(2))

    def test_aligned_inflow_steers_upstream_turbine(self):
        offsets, power = grid_search_yaw(InflowCondition(6.5, 270.0), LAYOUT)
        assert offsets[1] == 0.0          # downstream turbine stays greedy
        assert abs(offsets[0]) >= 10.0    # upstream steers substantially
        base = steady_farm_power(LAYOUT, InflowCondition(6.5, 270.0), np.zeros(2))
        assert power > base * 1.01

    def test_matches_exhaustive_oracle(self):
        inflow = InflowCondition(6.5, 270.0)
        grid = np.arange(-30.0, 31.0, 1.0)
        best = max((steady_farm_power(LAYOUT, inflow, np.array([g, 0.0])), g)
                   for g in grid)
        offsets, power = grid_search_yaw(inflow, LAYOUT)
        assert power == pytest.approx(best[0], rel=1e-12)
        assert offsets[0] == pytest.approx(best[1])

    def test_reversed_inflow_mirrors_roles(self):
        fwd, _ = grid_search_yaw(InflowCondition(6.5, 270.0), LAYOUT)
        rev, _ = grid_search_yaw(InflowCondition(6.5, 90.0), LAYOUT)
        assert fwd[1] == 0.0 and rev[0] == 0.0
        assert abs(rev[1]) == abs(fwd[0])

    def test_tie_break_prefers_zero_yaw(self):
        # single turbine: all yaw choices would tie only at gamma = 0
        from yawarena.wake import FarmLayout
        single = FarmLayout(np.array([[0.0, 0.0]]))
        offsets, _ = grid_search_yaw(InflowCondition(6.5, 270.0), single)
        assert np.array_equal(offsets, np.zeros(1))


class TestExpert:
    def test_converges_to_grid_search_offsets(self):
        env = WindFarmEnv(seed=0)
        env.reset(InflowCondition(6.5, 270.0))
        expert = ExpertAgent(LAYOUT, CFG)
        expert.reset(env)
        target, _ = grid_search_yaw(InflowCondition(6.5, 270.0), LAYOUT)
        for _ in range(40):
            env.step(expert.act(env.corrupted_observation(), env))
        assert np.allclose(env.agent_yaw, target, atol=1e-6)

    def test_respects_slew_limit(self):
        env = WindFarmEnv(seed=0)
        env.reset(InflowCondition(6.5, 270.0))
        expert = ExpertAgent(LAYOUT, CFG)
        expert.reset(env)
        prev = env.agent_yaw
        for _ in range(15):
            env.step(expert.act(env.corrupted_observation(), env))
            assert np.all(np.abs(env.agent_yaw - prev) <= CFG.max_yaw_delta + 1e-9)
            prev = env.agent_yaw

    def test_positive_episode_reward_clean(self):
        env = WindFarmEnv(seed=0)
        env.reset(InflowCondition(6.5, 270.0))
        expert = ExpertAgent(LAYOUT, CFG)
        expert.reset(env)
        rewards = []
        while not env.done:
            _, _, s, _ = env.step(expert.act(env.corrupted_observation(), env))
            rewards.append(s.reward)
        assert np.mean(rewards) > 0.005

    def test_sensed_inflow_reads_newest_frame(self):
        env = WindFarmEnv(seed=0)
        env.reset(InflowCondition(6.5, 270.0))
        expert = ExpertAgent(LAYOUT, CFG)
        sensed = expert.sensed_inflow(env.corrupted_observation())
        assert sensed.direction == pytest.approx(270.0, abs=1e-9)
        # mean of free-stream and waked turbine speeds
        assert 5.0 < sensed.speed <= 6.5

    def test_direction_spoof_shifts_target(self):
        """A direction bias makes the expert chase a rotated optimum; its
        commanded offsets must change relative to the clean case."""
        env = WindFarmEnv(seed=0)
        env.reset(InflowCondition(6.5, 270.0))
        expert = ExpertAgent(LAYOUT, CFG)
        clean_target = expert.target_offsets(env.corrupted_observation())
        eps = np.zeros((2, 4))
        eps[:, 1] = 10.0
        env.step(np.zeros(2), eps)
        spoofed_target = expert.target_offsets(env.corrupted_observation())
        assert not np.allclose(spoofed_target, clean_target)
