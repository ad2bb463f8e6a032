import math

import numpy as np
import pytest

from yawarena.agents import (BaselineAgent, ExpertAgent, make_policy_agent,
                             ROLE_ADVERSARY, ROLE_PROTAGONIST)
from yawarena.env import EnvConfig
from yawarena.gauntlet import (STANDARD_INFLOWS, EvalCell, EvalMatrix,
                               PolicyProtagonist, StandardEpisodes,
                               build_matrix, evaluate_pair, load_matrix,
                               run_episode, save_matrix, select_best_adversary,
                               select_best_protagonist, summarize,
                               write_matrix_table, write_summary)
from yawarena.env import WindFarmEnv
from yawarena.noise import NoiseBounds
from yawarena.tasks import CleanOpponent
from yawarena.wake import two_turbine_layout

CFG = EnvConfig()
LAYOUT = two_turbine_layout()
BOUNDS = NoiseBounds()
EPISODES = StandardEpisodes()


def small_matrix():
    cells = {}
    vals = {("p0", "clean"): 0.02, ("p0", "procedural"): 0.015, ("p0", "a0"): -0.01,
            ("p1", "clean"): 0.01, ("p1", "procedural"): 0.008, ("p1", "a0"): 0.005}
    for k, v in vals.items():
        cells[k] = EvalCell(v, 0.0, [v])
    return EvalMatrix(["p0", "p1"], ["clean", "procedural", "a0"], cells)


class TestEpisodeSet:
    def test_five_stratified_inflows(self):
        eps = list(EPISODES.episodes())
        assert len(eps) == 5
        speeds = [e[0].speed for e in eps]
        dirs = [e[0].direction for e in eps]
        assert speeds == [6.0, 6.25, 6.5, 6.75, 7.0]
        assert dirs == [267.0, 268.5, 270.0, 271.5, 273.0]
        assert [s for _, s in eps] == [12345 + k for k in range(5)]


class TestStandardError:
    def test_cell_stderr_from_known_scores(self):
        scores = [0.10, 0.20, 0.10, 0.20, 0.15]
        arr = np.array(scores)
        se = arr.std(ddof=1) / math.sqrt(5)
        assert se == pytest.approx(0.02236, abs=1e-4)


class TestEvaluatePair:
    def test_baseline_clean_cell_is_exactly_zero(self):
        cell = evaluate_pair(BaselineAgent(), "clean", EPISODES, CFG, LAYOUT, BOUNDS)
        assert cell.mean == 0.0 and cell.stderr == 0.0
        assert all(s == 0.0 for s in cell.scores)

    def test_baseline_row_zero_under_any_adversary(self):
        adv = make_policy_agent(88, 8, ROLE_ADVERSARY, np.random.default_rng(0))
        for spec in ("procedural", ("a0", adv)):
            cell = evaluate_pair(BaselineAgent(), spec, EPISODES, CFG, LAYOUT, BOUNDS)
            assert all(s == 0.0 for s in cell.scores)

    def test_expert_clean_cell_positive(self):
        cell = evaluate_pair(ExpertAgent(LAYOUT, CFG), "clean", EPISODES,
                             CFG, LAYOUT, BOUNDS)
        assert cell.mean > 0.005
        assert all(s > 0.0 for s in cell.scores)

    def test_cells_are_deterministic(self):
        adv = make_policy_agent(88, 8, ROLE_ADVERSARY, np.random.default_rng(1))
        prot = PolicyProtagonist(
            make_policy_agent(88, 2, ROLE_PROTAGONIST, np.random.default_rng(2)), "p0")
        for spec in ("procedural", ("a0", adv)):
            c1 = evaluate_pair(prot, spec, EPISODES, CFG, LAYOUT, BOUNDS)
            c2 = evaluate_pair(prot, spec, EPISODES, CFG, LAYOUT, BOUNDS)
            assert c1.scores == c2.scores

    def test_scores_one_per_episode(self):
        cell = evaluate_pair(BaselineAgent(), "procedural", EPISODES, CFG,
                             LAYOUT, BOUNDS)
        assert len(cell.scores) == 5


class TestRunEpisode:
    def test_trace_rows_cover_episode(self):
        env_rewards, rows = run_episode(
            WindFarmEnv(CFG, LAYOUT, 0), BaselineAgent(), CleanOpponent(),
            list(EPISODES.episodes())[2][0], record=True)
        assert len(env_rewards) == CFG.episode_steps
        assert len(rows) == CFG.episode_steps
        assert np.array_equal(rows[0]["true"], rows[0]["sensed"])
        assert np.all(rows[0]["eps"] == 0.0)


class TestMatrix:
    def test_axis_arithmetic(self):
        prots = [("p0", BaselineAgent()), ("p1", BaselineAgent()),
                 ("baseline", BaselineAgent())]
        advs = [("clean", "clean"), ("procedural", "procedural")]
        m = build_matrix(prots, advs, EPISODES, CFG, LAYOUT, BOUNDS)
        assert len(m.cells) == len(prots) * len(advs)
        assert len(m.row("p0")) == 2 and len(m.column("clean")) == 3

    def test_empty_axis_rejected(self):
        with pytest.raises(ValueError):
            build_matrix([], [("clean", "clean")], EPISODES, CFG, LAYOUT, BOUNDS)

    def test_json_round_trip(self, tmp_path):
        m = small_matrix()
        m.meta["config_hash"] = "abc"
        path = tmp_path / "m.json"
        save_matrix(path, m)
        back = load_matrix(path)
        assert back.protagonist_labels == m.protagonist_labels
        assert back.adversary_labels == m.adversary_labels
        assert back.cell("p0", "a0").mean == m.cell("p0", "a0").mean
        assert back.meta["config_hash"] == "abc"

    def test_csv_outputs_parse(self, tmp_path):
        import csv
        m = small_matrix()
        write_matrix_table(tmp_path / "m.csv", m)
        with open(tmp_path / "m.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 6
        assert float(rows[0]["mean"]) == 0.02
        series = summarize(m, ["p0", "p1"], ["a0"], expert_label="p0")
        write_summary(tmp_path / "s.csv", series)
        with open(tmp_path / "s.csv") as f:
            srows = list(csv.DictReader(f))
        assert {r["series"] for r in srows} == set(series)


class TestSummaryAndSelection:
    def test_series_values(self):
        m = small_matrix()
        s = summarize(m, ["p0", "p1"], ["a0"], expert_label="p0")
        assert s["diagonal"] == [-0.01]
        assert s["expert_vs_adversary"] == [-0.01]
        assert s["protagonist_vs_clean"] == [0.02, 0.01]
        # row/column means over the trained adversaries only
        assert s["protagonist_row_mean"] == [-0.01, 0.005]
        assert s["adversary_column_mean"] == [pytest.approx(-0.0025)]

    def test_best_protagonist_is_row_mean_argmax(self):
        m = small_matrix()
        s = summarize(m, ["p0", "p1"], ["a0"], expert_label="p0")
        assert select_best_protagonist(s, ["p0", "p1"]) == "p1"

    def test_best_adversary_is_column_mean_argmin(self):
        cells = {("p0", "a0"): EvalCell(0.01, 0, [0.01]),
                 ("p0", "a1"): EvalCell(-0.02, 0, [-0.02]),
                 ("p0", "clean"): EvalCell(0.02, 0, [0.02]),
                 ("p0", "procedural"): EvalCell(0.015, 0, [0.015])}
        m = EvalMatrix(["p0"], ["clean", "procedural", "a0", "a1"], cells)
        s = summarize(m, ["p0"], ["a0", "a1"], expert_label="p0")
        assert select_best_adversary(s, ["a0", "a1"]) == "a1"
