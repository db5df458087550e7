"""Discrete-time stochastic bandit game.

Each slot every agent samples an arm from its Hedge policy, the population
profile is formed from all sampled arms, and every agent moves the state of its
played arm toward the realized reward by the slot's stepsize. Unplayed arms keep
their state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
import json
from typing import TYPE_CHECKING, Any

import numpy as np
from upath import UPath

from banditfield.core import (
    RunTrace,
    StateProfile,
    agent_generators,
    as_state,
    config_to_dict,
    init_state_profile,
    resolve_config,
    stepsize,
    validate_config,
)
from banditfield.exceptions import PolicyError
from banditfield.log import get_logger
from banditfield.policy import hedge_profile, inverse_cdf
from banditfield.reward import reward_vector


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike, NDArray
    from upath.types import JoinablePathLike

    from banditfield.core import GameConfig


logger = get_logger(__name__)

UNIFORM_BLOCK = 1024
"""Slots of uniforms pre-drawn per agent stream at a time."""

TRACE_FILES = ("states.csv", "population.csv", "rewards.csv", "header.json")


@dataclass(frozen=True, slots=True)
class SlotRecord:
    """Everything observed in one slot."""

    n: int
    actions: NDArray[np.intp]
    population: NDArray[np.float64]
    rewards: NDArray[np.float64]
    arm_rewards: NDArray[np.float64]
    probabilities: NDArray[np.float64]

    @property
    def expected_rewards(self) -> NDArray[np.float64]:
        """Policy-expected reward of each agent, ``sum_j sigma(s^i, j) r(f_n, j)``."""
        return self.probabilities @ self.arm_rewards


class AgentStreams:
    """Per-agent uniform streams consumed one value per slot.

    Values are drawn in blocks; since every stream is read sequentially the
    result does not depend on the block size.
    """

    def __init__(self, seed: int, num_agents: int, block: int = UNIFORM_BLOCK) -> None:
        self._generators = agent_generators(seed, num_agents)
        self._block = block
        self._buffer = np.empty((num_agents, 0))
        self._cursor = 0

    def next(self) -> NDArray[np.float64]:
        if self._cursor >= self._buffer.shape[1]:
            self._buffer = np.stack([g.random(self._block) for g in self._generators])
            self._cursor = 0
        values = self._buffer[:, self._cursor]
        self._cursor += 1
        return values


def population_profile(actions: ArrayLike, num_agents: int, num_arms: int) -> NDArray[np.float64]:
    """Fraction of agents playing each arm.

    Raises:
        PolicyError: If an action is not a valid arm index
    """
    acts = np.asarray(actions, dtype=np.intp)
    if acts.shape != (num_agents,):
        msg = f"Expected {num_agents} actions, got shape {acts.shape}"
        raise PolicyError(msg)
    if np.any(acts < 0) or np.any(acts >= num_arms):
        msg = f"Invalid arm index in actions (0..{num_arms - 1})"
        raise PolicyError(msg)
    return np.bincount(acts, minlength=num_arms) / num_agents


def step(
    state: StateProfile | NDArray[np.float64],
    config: GameConfig,
    n: int,
    uniforms: NDArray[np.float64] | AgentStreams,
) -> tuple[StateProfile, SlotRecord]:
    """Advance the game by one slot.

    Args:
        state: State profile s_n
        config: Resolved configuration
        n: Slot index
        uniforms: One uniform per agent for this slot, or the agents' streams

    Returns:
        The next state profile and the slot's record
    """
    s = as_state(state)
    u = uniforms.next() if isinstance(uniforms, AgentStreams) else np.asarray(uniforms)
    probs = hedge_profile(s, config.betas(), config.etas(n), config.arm_mask())
    actions = inverse_cdf(np.cumsum(probs, axis=1), u)
    population = population_profile(actions, config.num_agents, config.num_arms)
    arm_rewards = reward_vector(config.reward_spec, population)
    rewards = arm_rewards[actions]
    gamma = stepsize(config.schedule, n)
    agents = np.arange(config.num_agents)
    new = s.copy()
    new[agents, actions] = (1.0 - gamma) * s[agents, actions] + gamma * rewards
    record = SlotRecord(
        n=n,
        actions=actions,
        population=population,
        rewards=rewards,
        arm_rewards=arm_rewards,
        probabilities=probs,
    )
    return StateProfile(new), record


def run(
    config: GameConfig,
    *,
    horizon: int | None = None,
    initial: StateProfile | None = None,
    on_slot: Callable[[SlotRecord], Any] | None = None,
) -> RunTrace:
    """Play the game for ``horizon`` slots (the config's by default).

    Args:
        config: Experiment configuration; arm thetas are drawn from its seed if unset
        horizon: Override of the number of slots, 0 allowed
        initial: Start state; drawn from the config's seed if None
        on_slot: Optional callback receiving every slot record

    Returns:
        The complete trace, deterministic given the config
    """
    config = resolve_config(validate_config(config))
    horizon = config.horizon if horizon is None else horizon
    if horizon < 0:
        msg = f"horizon must be non-negative, got {horizon}"
        raise ValueError(msg)
    stride = config.stride
    state = initial if initial is not None else init_state_profile(config)
    streams = AgentStreams(config.seed, config.num_agents)
    n_agents, n_arms = config.num_agents, config.num_arms

    actions = np.empty((horizon, n_agents), dtype=np.intp)
    populations = np.empty((horizon, n_arms))
    rewards = np.empty((horizon, n_agents))
    expected = np.empty((horizon, n_agents))
    arm_rewards = np.empty((horizon, n_arms))
    snapshots = [state.values]
    slots = [0]
    probabilities = []

    logger.debug("Running N=%d M=%d T=%d seed=%d", n_agents, n_arms, horizon, config.seed)
    for n in range(horizon):
        state, record = step(state, config, n, streams)
        actions[n] = record.actions
        populations[n] = record.population
        rewards[n] = record.rewards
        arm_rewards[n] = record.arm_rewards
        expected[n] = record.expected_rewards
        if n % stride == 0:
            probabilities.append(record.probabilities)
        if (n + 1) % stride == 0 or n + 1 == horizon:
            snapshots.append(state.values)
            slots.append(n + 1)
        if on_slot is not None:
            on_slot(record)
    return RunTrace(
        config=config,
        actions=actions,
        populations=populations,
        rewards=rewards,
        expected_rewards=expected,
        arm_rewards=arm_rewards,
        probabilities=np.asarray(probabilities).reshape(-1, n_agents, n_arms),
        states=np.asarray(snapshots),
        state_slots=np.asarray(slots, dtype=np.intp),
        stride=stride,
    )


def empirical_regret(trace: RunTrace, agent: int) -> float:
    """Regret of one agent against the best fixed arm in hindsight.

    ``max_j sum_n (r(f_n, j) - E[r(f_n, a_n^i)])`` where the expectation is over
    the agent's policy at slot n and f_n is the realized profile. Only the
    agent's playable arms compete.
    """
    if trace.horizon == 0:
        return 0.0
    totals = trace.arm_rewards.sum(axis=0)
    subsets = trace.config.arm_subsets
    if subsets is not None:
        totals = totals[list(subsets[agent])]
    return float(np.max(totals) - trace.expected_rewards[:, agent].sum())


def agent_regrets(trace: RunTrace) -> NDArray[np.float64]:
    """Empirical regret of every agent."""
    return np.asarray([empirical_regret(trace, i) for i in range(trace.config.num_agents)])


def cumulative_reward(trace: RunTrace) -> float:
    """Mean over agents of the total realized reward."""
    if trace.horizon == 0:
        return 0.0
    return float(trace.rewards.sum(axis=0).mean())


def moving_average(values: ArrayLike, window: int) -> NDArray[np.float64]:
    """Centered moving average for display; edges average the available values."""
    data = np.asarray(values, dtype=float)
    if window <= 1 or data.size == 0:
        return data.copy()
    kernel = np.ones(window)
    sums = np.convolve(data, kernel, mode="same")
    counts = np.convolve(np.ones_like(data), kernel, mode="same")
    return sums / counts


def export_trace(
    trace: RunTrace,
    directory: JoinablePathLike,
    *,
    smooth: int = 0,
    extra_header: dict[str, Any] | None = None,
) -> list[UPath]:
    """Write a trace as CSV files plus a JSON header.

    Args:
        trace: Trace to export
        directory: Target directory, created if missing
        smooth: Window of an additional moving-average column in population.csv
        extra_header: Additional entries for header.json

    Returns:
        Paths of the written files
    """
    out = UPath(directory)
    out.mkdir(parents=True, exist_ok=True)
    n_arms = trace.config.num_arms
    paths = [out / name for name in TRACE_FILES]
    with paths[0].open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["n", "agent", "arm", "value"])
        writer.writerows(state_rows(trace.state_slots, trace.states))
    with paths[1].open("w", newline="") as fp:
        writer = csv.writer(fp)
        header = ["n", "arm", "fraction"] + ([f"fraction_ma{smooth}"] if smooth > 1 else [])
        writer.writerow(header)
        smoothed = [moving_average(trace.populations[:, j], smooth) for j in range(n_arms)]
        for n in range(trace.horizon):
            for j in range(n_arms):
                row = [n, j, repr(float(trace.populations[n, j]))]
                if smooth > 1:
                    row.append(repr(float(smoothed[j][n])))
                writer.writerow(row)
    with paths[2].open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["n", "agent", "reward"])
        for n in range(trace.horizon):
            writer.writerows((n, i, repr(float(r))) for i, r in enumerate(trace.rewards[n]))
    header_data = {
        "config": config_to_dict(trace.config),
        "arm_thetas": list(trace.config.reward_spec.arm_thetas or []),
        "horizon": trace.horizon,
        "stride": trace.stride,
        **(extra_header or {}),
    }
    paths[3].write_text(json.dumps(header_data, indent=2) + "\n", "utf-8")
    return paths


def state_rows(
    times: Sequence[float] | NDArray[Any],
    states: NDArray[np.float64],
) -> list[tuple[Any, int, int, str]]:
    """Long-format rows ``(time, agent, arm, value)`` of a state series."""
    rows = []
    for t, snapshot in zip(times, states):
        time = t.item() if isinstance(t, np.generic) else t
        for i, row in enumerate(snapshot):
            rows.extend((time, i, j, repr(float(v))) for j, v in enumerate(row))
    return rows
