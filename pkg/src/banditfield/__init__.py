"""banditfield: mean field bandit games with continuous rewards.

Stochastic simulator, mean-field ODE and equilibrium solver, and numerical
checks of the convergence conditions.
"""

from __future__ import annotations

from importlib.metadata import version

__version__ = version("banditfield")
__title__ = "banditfield"

__author__ = "Philipp Temminghoff"
__author_email__ = "philipptemminghoff@googlemail.com"
__copyright__ = "Copyright (c) 2024 Philipp Temminghoff"
__license__ = "MIT"
__url__ = "https://github.com/phil65/banditfield"

from banditfield.core import (
    GameConfig,
    PopulationProfile,
    RunTrace,
    StateProfile,
    StepsizeSchedule,
    load_config,
    validate_config,
)
from banditfield.exceptions import (
    AnalysisError,
    BanditFieldError,
    CommandError,
    ConfigError,
    IntegrationError,
    PolicyError,
    RewardError,
    TraceError,
)
from banditfield.meanfield import (
    MfeSolution,
    OdeTrajectory,
    integrate_ode,
    solve_mfe,
)
from banditfield.policy import EtaSchedule, PolicyParams, hedge_probabilities
from banditfield.reward import RewardSpec, reward_vector
from banditfield.sim import run, step

__all__ = [
    "AnalysisError",
    "BanditFieldError",
    "CommandError",
    "ConfigError",
    "EtaSchedule",
    "GameConfig",
    "IntegrationError",
    "MfeSolution",
    "OdeTrajectory",
    "PolicyError",
    "PolicyParams",
    "PopulationProfile",
    "RewardError",
    "RewardSpec",
    "RunTrace",
    "StateProfile",
    "StepsizeSchedule",
    "TraceError",
    "__version__",
    "hedge_probabilities",
    "integrate_ode",
    "load_config",
    "reward_vector",
    "run",
    "solve_mfe",
    "step",
    "validate_config",
]
