"""Tests for the stochastic game loop."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from banditfield.core import GameConfig, StateProfile, init_state_profile, resolve_config
from banditfield.exceptions import PolicyError
from banditfield.experiments import TableRun, table_config, table_run
from banditfield.meanfield import solve_mfe
from banditfield.policy import EtaSchedule
from banditfield.reward import RewardSpec
from banditfield.sim import (
    AgentStreams,
    agent_regrets,
    cumulative_reward,
    empirical_regret,
    export_trace,
    moving_average,
    population_profile,
    run,
    step,
)


class TestPopulationProfile:
    def test_all_on_one_arm(self):
        np.testing.assert_array_equal(population_profile([0, 0, 0], 3, 4), [1, 0, 0, 0])

    def test_hand_count(self):
        profile = population_profile([0, 1, 1, 2], 4, 4)
        np.testing.assert_array_equal(profile, [0.25, 0.5, 0.25, 0.0])
        assert profile.sum() == 1.0

    def test_invalid_arm(self):
        with pytest.raises(PolicyError, match="Invalid arm index"):
            population_profile([0, 4], 2, 4)

    def test_wrong_count(self):
        with pytest.raises(PolicyError, match="Expected 3 actions"):
            population_profile([0, 1], 3, 4)


class TestStep:
    @pytest.fixture
    def two_agents(self) -> GameConfig:
        spec = RewardSpec(kind="linear", theta=1.0, arm_thetas=(1.0, 1.0))
        return GameConfig(num_agents=2, num_arms=2, horizon=1, reward_spec=spec)

    def test_hand_simulated_first_slot(self, two_agents):
        state = np.array([[0.3, 0.6], [0.9, 0.1]])
        new, record = step(state, two_agents, 0, np.array([0.0, 0.999]))
        np.testing.assert_array_equal(record.actions, [0, 1])
        np.testing.assert_array_equal(record.population, [0.5, 0.5])
        np.testing.assert_allclose(record.rewards, [0.5, 0.5])
        np.testing.assert_allclose(new.values, [[0.5, 0.6], [0.9, 0.5]])

    def test_half_stepsize(self, two_agents):
        state = np.array([[0.3, 0.6], [0.9, 0.1]])
        new, _ = step(state, two_agents, 1, np.array([0.0, 0.999]))
        np.testing.assert_allclose(new.values, [[0.4, 0.6], [0.9, 0.3]])

    def test_same_arm_crowding(self, two_agents):
        state = np.array([[0.3, 0.6], [0.9, 0.1]])
        new, record = step(state, two_agents, 0, np.array([0.0, 0.0]))
        np.testing.assert_array_equal(record.population, [1.0, 0.0])
        np.testing.assert_allclose(new.values, [[0.0, 0.6], [0.0, 0.1]])

    def test_record_probabilities(self, two_agents):
        state = np.array([[0.3, 0.6], [0.9, 0.1]])
        _, record = step(state, two_agents, 0, np.array([0.5, 0.5]))
        np.testing.assert_allclose(record.probabilities.sum(axis=1), 1.0)
        expected = record.probabilities @ record.arm_rewards
        np.testing.assert_allclose(record.expected_rewards, expected)


class TestRun:
    def test_zero_horizon(self, contraction_config):
        trace = run(contraction_config, horizon=0)
        assert trace.horizon == 0
        assert trace.states.shape == (1, 8, 4)
        assert cumulative_reward(trace) == 0.0
        assert empirical_regret(trace, 0) == 0.0

    def test_deterministic(self, contraction_config):
        a = run(contraction_config)
        b = run(contraction_config)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.rewards, b.rewards)

    def test_seed_changes_trace(self, contraction_config):
        a = run(contraction_config)
        b = run(contraction_config.replace(seed=12))
        assert not np.array_equal(a.actions, b.actions)

    def test_starts_from_initial_profile(self, contraction_config):
        trace = run(contraction_config, horizon=5)
        initial = init_state_profile(trace.config)
        np.testing.assert_array_equal(trace.states[0], initial.values)

    def test_states_stay_in_unit_interval(self, linear_config):
        trace = run(linear_config)
        assert np.all((trace.states >= 0) & (trace.states <= 1))

    def test_one_entry_changes_per_agent(self, contraction_config):
        trace = run(contraction_config)
        deltas = np.diff(trace.states, axis=0)
        changed = np.count_nonzero(deltas, axis=2)
        assert changed.max() <= 1
        gammas = 1.0 / np.arange(1, trace.horizon + 1, dtype=float)
        assert np.all(np.abs(deltas).max(axis=(1, 2)) <= gammas + 1e-15)

    def test_changed_entry_is_played_arm(self, contraction_config):
        trace = run(contraction_config, horizon=20)
        deltas = np.diff(trace.states, axis=0)
        for n in range(20):
            for i in range(8):
                unplayed = np.delete(deltas[n, i], trace.actions[n, i])
                assert np.all(unplayed == 0.0)

    def test_population_multiples_of_one_over_n(self, contraction_config):
        trace = run(contraction_config)
        counts = trace.populations * 8
        np.testing.assert_allclose(counts, np.round(counts), atol=1e-12)
        np.testing.assert_allclose(trace.populations.sum(axis=1), 1.0, atol=1e-12)

    def test_on_slot_callback(self, contraction_config):
        seen = []
        run(contraction_config, horizon=7, on_slot=lambda record: seen.append(record.n))
        assert seen == list(range(7))

    def test_arm_subsets_respected(self):
        subsets = ((0, 1), (1, 2), (2,), (0, 2))
        config = GameConfig(num_agents=4, num_arms=3, horizon=100, arm_subsets=subsets, seed=3)
        trace = run(config)
        for i, subset in enumerate(subsets):
            assert set(trace.actions[:, i].tolist()) <= set(subset)
        assert np.all(trace.states[:, 0, 2] == 0.0)
        assert np.all(trace.states[:, 2, :2] == 0.0)
        assert empirical_regret(trace, 2) == pytest.approx(0.0, abs=1e-9)

    def test_diminishing_exploration(self):
        config = GameConfig(num_agents=5, num_arms=3, horizon=50, eta=EtaSchedule(eta0=0.5))
        trace = run(config)
        assert trace.horizon == 50
        assert trace.probabilities.min() > 0

    def test_thinned_snapshots(self, contraction_config):
        trace = run(contraction_config.replace(snapshot_stride=50))
        assert trace.state_slots.tolist() == [0, 50, 100, 150, 200, 250, 300]
        assert not trace.is_full
        assert trace.probabilities.shape[0] == 6

    def test_explicit_initial_state(self, contraction_config):
        initial = StateProfile(np.full((8, 4), 0.9))
        trace = run(contraction_config, horizon=3, initial=initial)
        np.testing.assert_array_equal(trace.states[0], initial.values)

    def test_negative_horizon(self, contraction_config):
        with pytest.raises(ValueError, match="non-negative"):
            run(contraction_config, horizon=-1)


def test_agent_streams_block_size_does_not_matter():
    small = AgentStreams(5, 3, block=2)
    large = AgentStreams(5, 3, block=100)
    for _ in range(7):
        np.testing.assert_array_equal(small.next(), large.next())


def test_terminal_state_near_equilibrium():
    spec = RewardSpec(kind="general", theta=0.5)
    config = GameConfig(
        num_agents=100,
        num_arms=4,
        horizon=5000,
        beta=0.5,
        eta=0.2,
        stepsize_alpha=0.75,
        reward_spec=spec,
        seed=21,
    )
    trace = run(config)
    mfe = solve_mfe(resolve_config(config))
    assert mfe.converged
    assert trace.terminal_state.distance(mfe.state) < 0.05


class TestRegret:
    def test_bounded_by_horizon(self, linear_config):
        trace = run(linear_config)
        regrets = agent_regrets(trace)
        assert regrets.shape == (10,)
        assert np.all(regrets <= trace.horizon)

    def test_matches_definition(self, contraction_config):
        trace = run(contraction_config, horizon=40)
        i = 3
        expected_gain = sum(
            trace.probabilities[n, i] @ trace.arm_rewards[n] for n in range(trace.horizon)
        )
        best = max(trace.arm_rewards[:, j].sum() for j in range(4))
        assert empirical_regret(trace, i) == pytest.approx(best - expected_gain)

    def test_general_reference_magnitudes(self):
        spec = RewardSpec(kind="general", theta=0.5)
        base = GameConfig(num_agents=100, num_arms=4, horizon=2000, reward_spec=spec)
        regrets, rewards = [], []
        for seed in range(1, 7):
            trace = run(base.replace(seed=seed))
            regrets.append(agent_regrets(trace).mean())
            rewards.append(cumulative_reward(trace))
        assert np.mean(regrets) < np.sqrt(2000)
        assert np.mean(regrets) == pytest.approx(13.758, rel=0.5)
        assert np.mean(rewards) == pytest.approx(1796.961, rel=0.05)

    def test_linear_reference_reward(self):
        spec = RewardSpec(kind="linear", theta=1.0)
        config = GameConfig(
            num_agents=200, num_arms=4, horizon=2000, beta=2.0, reward_spec=spec, seed=1
        )
        assert cumulative_reward(run(config)) == pytest.approx(1560.613, rel=0.05)


REFERENCE_TABLE_REWARDS = {
    ("general", True): 1796.961,
    ("general", False): 1784.582,
    ("linear", True): 1554.948,
    ("linear", False): 1558.675,
}


@pytest.fixture(scope="module")
def table_cells() -> dict[tuple[str, bool], list[TableRun]]:
    return {
        key: [table_run(table_config(key[0], key[1], 100, seed)) for seed in range(1, 7)]
        for key in REFERENCE_TABLE_REWARDS
    }


class TestReferenceTable:
    @pytest.mark.parametrize("key", list(REFERENCE_TABLE_REWARDS))
    def test_regret_below_square_root_horizon(self, table_cells, key):
        cell = table_cells[key]
        assert np.mean([r.regret_mean for r in cell]) < np.sqrt(2000)
        assert all(r.regret_max >= r.regret_mean for r in cell)

    @pytest.mark.parametrize("key", list(REFERENCE_TABLE_REWARDS))
    def test_rewards_match_reference(self, table_cells, key):
        rewards = [r.cumulative_reward for r in table_cells[key]]
        assert np.mean(rewards) == pytest.approx(REFERENCE_TABLE_REWARDS[key], rel=0.05)

    def test_general_contraction_regret_below_other_general_and_linear(self, table_cells):
        means = {k: np.mean([r.regret_mean for r in cell]) for k, cell in table_cells.items()}
        assert means["general", True] < means["general", False]
        assert means["general", True] < means["linear", True]


def test_moving_average():
    np.testing.assert_allclose(moving_average([1, 2, 3, 4, 5], 3), [1.5, 2, 3, 4, 4.5])
    np.testing.assert_array_equal(moving_average([1.0, 3.0], 1), [1.0, 3.0])


def test_export_trace(tmp_path, contraction_config):
    trace = run(contraction_config, horizon=10)
    paths = export_trace(trace, tmp_path / "seed-11", smooth=3, extra_header={"note": "x"})
    assert [p.name for p in paths] == ["states.csv", "population.csv", "rewards.csv", "header.json"]
    with (tmp_path / "seed-11" / "states.csv").open() as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["n", "agent", "arm", "value"]
    assert len(rows) == 1 + 11 * 8 * 4
    with (tmp_path / "seed-11" / "population.csv").open() as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["n", "arm", "fraction", "fraction_ma3"]
    assert len(rows) == 1 + 10 * 4
    with (tmp_path / "seed-11" / "rewards.csv").open() as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["n", "agent", "reward"]
    assert len(rows) == 1 + 10 * 8
    header = json.loads((tmp_path / "seed-11" / "header.json").read_text())
    assert len(header["arm_thetas"]) == 4
    assert header["config"]["seed"] == 11
    assert header["note"] == "x"
