from __future__ import annotations

import pytest

from banditfield.commands import CommandContext, CommandStore
from banditfield.core import GameConfig
from banditfield.reward import RewardSpec


@pytest.fixture
def contraction_config() -> GameConfig:
    """General reward with (theta, beta, eta) = (0.5, 0.5, 0.2), small population."""
    return GameConfig(
        num_agents=8,
        num_arms=4,
        horizon=300,
        beta=0.5,
        eta=0.2,
        reward_spec=RewardSpec(kind="general", theta=0.5),
        seed=11,
    )


@pytest.fixture
def linear_config() -> GameConfig:
    """Linear reward with (theta, beta, eta) = (1, 2, 0.2)."""
    return GameConfig(
        num_agents=10,
        num_arms=4,
        horizon=200,
        beta=2.0,
        eta=0.2,
        reward_spec=RewardSpec(kind="linear", theta=1.0),
        seed=5,
    )


@pytest.fixture
def store() -> CommandStore:
    """Fixture providing command store."""
    return CommandStore()


@pytest.fixture
def context(store: CommandStore) -> CommandContext[None]:
    """Fixture providing command context."""
    return store.create_context(None)
