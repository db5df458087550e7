"""Domain types, configuration and seeding shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
import json
import math
from typing import TYPE_CHECKING, Any

import numpy as np
from upath import UPath

from banditfield.exceptions import ConfigError, RewardError, TraceError
from banditfield.log import get_logger
from banditfield.policy import EtaSchedule, PolicyParams
from banditfield.reward import RewardSpec, sample_arm_thetas


if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray
    from upath.types import JoinablePathLike


logger = get_logger(__name__)

SIMPLEX_TOLERANCE = 1e-12
FULL_SNAPSHOT_LIMIT = 10_000
"""Horizons up to this length keep every state snapshot by default."""

# spawn keys of the independent random streams derived from one root seed
THETA_STREAM = 0
INIT_STREAM = 1
AGENT_STREAM = 2
ANALYSIS_STREAM = 3


@dataclass(frozen=True, slots=True)
class GameConfig:
    """Full description of one bandit-game experiment."""

    num_agents: int
    """Number of agents N."""

    num_arms: int
    """Number of arms M."""

    horizon: int
    """Number of slots T."""

    beta: float | tuple[float, ...] = 0.5
    """Smoothing parameter, uniform or one per agent."""

    eta: float | EtaSchedule = 0.2
    """Constant exploration weight or diminishing schedule."""

    stepsize_alpha: float = 1.0
    """Stepsize exponent, gamma_n = 1 / (n + 1) ** alpha."""

    reward_spec: RewardSpec = field(default_factory=RewardSpec)
    """Reward family."""

    arm_subsets: tuple[tuple[int, ...], ...] | None = None
    """Playable arms per agent (0-based); all arms when None."""

    seed: int = 0
    """Root seed of every random stream of a run."""

    snapshot_stride: int | None = None
    """Keep every k-th state snapshot; None picks 1 for short horizons."""

    def __post_init__(self) -> None:
        if isinstance(self.beta, list | tuple | np.ndarray):
            object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.arm_subsets is not None:
            subsets = tuple(tuple(int(a) for a in s) for s in self.arm_subsets)
            object.__setattr__(self, "arm_subsets", subsets)

    def replace(self, **changes: Any) -> GameConfig:
        """Return a validated copy with ``changes`` applied."""
        return validate_config(replace(self, **changes))

    @property
    def stride(self) -> int:
        if self.snapshot_stride is not None:
            return self.snapshot_stride
        if self.horizon <= FULL_SNAPSHOT_LIMIT:
            return 1
        return math.ceil(self.horizon / FULL_SNAPSHOT_LIMIT)

    @property
    def schedule(self) -> StepsizeSchedule:
        return StepsizeSchedule(self.stepsize_alpha)

    @property
    def is_heterogeneous(self) -> bool:
        return isinstance(self.beta, tuple) or isinstance(self.eta, EtaSchedule)

    def betas(self) -> NDArray[np.float64]:
        """Per-agent smoothing parameters."""
        return np.broadcast_to(np.asarray(self.beta, dtype=float), (self.num_agents,)).copy()

    def etas(self, n: int) -> NDArray[np.float64]:
        """Per-agent exploration weights at slot ``n``."""
        value = self.eta.at(n) if isinstance(self.eta, EtaSchedule) else self.eta
        return np.broadcast_to(np.asarray(value, dtype=float), (self.num_agents,)).copy()

    def limit_etas(self) -> NDArray[np.float64]:
        """Exploration weights of the autonomous mean-field dynamics.

        Diminishing schedules vanish in the limit, so the ODE and its
        equilibrium use ``eta = 0`` for them.
        """
        if isinstance(self.eta, EtaSchedule):
            return np.zeros(self.num_agents)
        return self.etas(0)

    def arm_mask(self) -> NDArray[np.bool_] | None:
        """N x M boolean playable-arm mask, or None when all arms are playable."""
        if self.arm_subsets is None:
            return None
        mask = np.zeros((self.num_agents, self.num_arms), dtype=bool)
        for i, subset in enumerate(self.arm_subsets):
            mask[i, list(subset)] = True
        return mask

    def policy_params(self, agent: int, n: int = 0) -> PolicyParams:
        """Policy parameters of one agent at slot ``n``."""
        subset = self.arm_subsets[agent] if self.arm_subsets is not None else None
        return PolicyParams(
            beta=float(self.betas()[agent]),
            eta=float(self.etas(n)[agent]),
            arm_subset=subset,
        )


@dataclass(frozen=True, slots=True)
class StepsizeSchedule:
    """Stepsizes ``gamma_n = 1 / (n + 1) ** alpha``."""

    alpha: float = 1.0

    def __call__(self, n: int) -> float:
        return stepsize(self, n)

    def knots(self, count: int) -> NDArray[np.float64]:
        """Interpolated times ``tau_0 .. tau_{count-1}`` with ``tau_n = sum_{k<n} gamma_k``."""
        gammas = 1.0 / np.arange(1, count, dtype=float) ** self.alpha
        return np.concatenate([[0.0], np.cumsum(gammas)])


@dataclass(frozen=True, slots=True)
class StateProfile:
    """N x M matrix of learned rewards; entries of unplayable arms stay at 0."""

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def distance(self, other: StateProfile | NDArray[np.float64]) -> float:
        """Sup-norm distance ``||self - other||_inf``."""
        other_values = other.values if isinstance(other, StateProfile) else other
        return float(np.max(np.abs(self.values - other_values)))


@dataclass(frozen=True, slots=True)
class PopulationProfile:
    """Fraction of agents per arm."""

    fractions: NDArray[np.float64]

    def __post_init__(self) -> None:
        fractions = np.array(self.fractions, dtype=float)
        if (
            fractions.ndim != 1
            or np.any(fractions < 0)
            or np.any(fractions > 1)
            or abs(fractions.sum() - 1.0) > SIMPLEX_TOLERANCE
        ):
            msg = f"Population profile is not a simplex: {fractions}"
            raise ValueError(msg)
        fractions.setflags(write=False)
        object.__setattr__(self, "fractions", fractions)

    def __len__(self) -> int:
        return len(self.fractions)


@dataclass(frozen=True, slots=True)
class RunTrace:
    """Record of one simulation run.

    Per-slot arrays have T rows; state snapshots are kept every ``stride`` slots
    (``state_slots`` lists which), always including the initial and terminal state.
    """

    config: GameConfig
    """Resolved configuration (arm thetas filled in)."""

    actions: NDArray[np.intp]
    """T x N played arms."""

    populations: NDArray[np.float64]
    """T x M population profiles."""

    rewards: NDArray[np.float64]
    """T x N realized rewards."""

    expected_rewards: NDArray[np.float64]
    """T x N policy-expected rewards sum_j sigma(s_n^i, j) r(f_n, j)."""

    arm_rewards: NDArray[np.float64]
    """T x M rewards r(f_n, j) of every arm."""

    probabilities: NDArray[np.float64]
    """K x N x M policy matrices at the slots in ``state_slots`` (terminal slot excluded)."""

    states: NDArray[np.float64]
    """K' x N x M state snapshots at ``state_slots``."""

    state_slots: NDArray[np.intp]
    """Slot index of each state snapshot."""

    stride: int = 1

    @property
    def horizon(self) -> int:
        return int(self.actions.shape[0])

    @property
    def initial_state(self) -> StateProfile:
        return StateProfile(self.states[0])

    @property
    def terminal_state(self) -> StateProfile:
        return StateProfile(self.states[-1])

    @property
    def is_full(self) -> bool:
        return self.stride == 1

    def require_full(self) -> None:
        if not self.is_full:
            msg = f"Operation needs every state snapshot, trace is thinned by {self.stride}"
            raise TraceError(msg)


def validate_config(config: GameConfig) -> GameConfig:
    """Check every constraint of ``config`` and return it unchanged.

    Raises:
        ConfigError: For the first violated constraint, naming the field
    """
    if config.num_agents < 1:
        raise ConfigError("num_agents", f"must be at least 1, got {config.num_agents}")
    if config.num_arms < 2:  # noqa: PLR2004
        raise ConfigError("num_arms", f"must be at least 2, got {config.num_arms}")
    if config.horizon < 1:
        raise ConfigError("horizon", f"must be at least 1, got {config.horizon}")
    if not 0.5 < config.stepsize_alpha <= 1.0:  # noqa: PLR2004
        msg = f"stepsize_alpha out of range (1/2, 1]: {config.stepsize_alpha}"
        raise ConfigError("stepsize_alpha", msg)
    betas = np.atleast_1d(np.asarray(config.beta, dtype=float))
    if isinstance(config.beta, tuple) and len(config.beta) != config.num_agents:
        raise ConfigError("beta", f"expected {config.num_agents} values, got {len(config.beta)}")
    if not np.all(betas > 0):
        raise ConfigError("beta", "every beta must be positive")
    if isinstance(config.eta, EtaSchedule):
        eta0 = np.atleast_1d(np.asarray(config.eta.eta0, dtype=float))
        if eta0.size not in (1, config.num_agents):
            raise ConfigError("eta", f"expected 1 or {config.num_agents} eta0 values")
    elif not 0.0 <= config.eta <= 1.0:
        raise ConfigError("eta", f"must lie in [0, 1], got {config.eta}")
    _validate_reward(config)
    if config.arm_subsets is not None:
        if len(config.arm_subsets) != config.num_agents:
            raise ConfigError("arm_subsets", f"expected {config.num_agents} subsets")
        for i, subset in enumerate(config.arm_subsets):
            if not subset:
                raise ConfigError("arm_subsets", f"empty arm subset for agent {i}")
            if any(not 0 <= a < config.num_arms for a in subset):
                raise ConfigError("arm_subsets", f"arm index out of range for agent {i}")
            if len(set(subset)) != len(subset):
                raise ConfigError("arm_subsets", f"duplicate arm for agent {i}")
    if config.snapshot_stride is not None and config.snapshot_stride < 1:
        raise ConfigError("snapshot_stride", "must be at least 1")
    if not 0 <= config.seed < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    return config


def _validate_reward(config: GameConfig) -> None:
    spec = config.reward_spec
    if spec.kind != "custom" and spec.theta < 0:
        raise ConfigError("reward_spec", f"theta must be non-negative, got {spec.theta}")
    if spec.kind == "linear" and spec.theta > 1:
        raise ConfigError("reward_spec", f"linear reward needs theta in [0, 1], got {spec.theta}")
    if spec.arm_thetas is None:
        return
    try:
        thetas = spec.thetas(config.num_arms)
    except RewardError as e:
        raise ConfigError("reward_spec", str(e)) from e
    if spec.kind != "custom" and (
        np.any(thetas < 0.8 * spec.theta - 1e-12) or np.any(thetas > spec.theta + 1e-12)
    ):
        raise ConfigError("reward_spec", f"arm_thetas outside [0.8 theta, theta]: {thetas}")


def root_sequence(seed: int, stream: int) -> np.random.SeedSequence:
    """Seed sequence of one named stream derived from the root seed."""
    return np.random.SeedSequence([seed, stream])


def make_rng(seed: int, stream: int = ANALYSIS_STREAM) -> np.random.Generator:
    return np.random.default_rng(root_sequence(seed, stream))


def agent_generators(seed: int, num_agents: int) -> list[np.random.Generator]:
    """One generator per agent, keyed by (root seed, agent index).

    Adding agents leaves the streams of existing agents untouched.
    """
    return [
        np.random.default_rng(np.random.SeedSequence([seed, AGENT_STREAM, i]))
        for i in range(num_agents)
    ]


def resolve_config(config: GameConfig) -> GameConfig:
    """Fill in per-arm reward parameters drawn from the run seed."""
    spec = config.reward_spec
    if spec.kind == "custom" or spec.arm_thetas is not None:
        return config
    thetas = sample_arm_thetas(spec.theta, config.num_arms, make_rng(config.seed, THETA_STREAM))
    logger.debug("Sampled arm thetas %s for seed %d", thetas, config.seed)
    return replace(config, reward_spec=spec.with_arm_thetas(thetas))


def init_state_profile(
    config: GameConfig,
    rng: np.random.Generator | None = None,
) -> StateProfile:
    """Initial states drawn i.i.d. uniform on [0, 1].

    Args:
        config: Validated configuration
        rng: Generator to draw from; the config's initialization stream by default

    Returns:
        N x M state profile, zero on arms outside an agent's subset
    """
    rng = rng or make_rng(config.seed, INIT_STREAM)
    values = rng.random((config.num_agents, config.num_arms))
    mask = config.arm_mask()
    if mask is not None:
        values = np.where(mask, values, 0.0)
    return StateProfile(values)


def stepsize(schedule: StepsizeSchedule, n: int) -> float:
    """Stepsize ``1 / (n + 1) ** alpha`` of slot ``n``."""
    if n < 0:
        msg = f"Slot index must be non-negative, got {n}"
        raise ValueError(msg)
    return 1.0 / float(n + 1) ** schedule.alpha


def as_state(values: StateProfile | ArrayLike) -> NDArray[np.float64]:
    if isinstance(values, StateProfile):
        return values.values
    return np.asarray(values, dtype=float)


def config_to_dict(config: GameConfig) -> dict[str, Any]:
    """Plain-data form of ``config`` (JSON compatible)."""
    data: dict[str, Any] = {}
    for f in fields(config):
        value = getattr(config, f.name)
        match value:
            case RewardSpec():
                data[f.name] = value.to_dict()
            case EtaSchedule(eta0=eta0, kappa=kappa):
                eta0_data = list(eta0) if isinstance(eta0, tuple) else eta0
                data[f.name] = {"eta0": eta0_data, "kappa": kappa}
            case tuple():
                data[f.name] = [list(v) if isinstance(v, tuple) else v for v in value]
            case _:
                data[f.name] = value
    return data


def config_from_dict(data: dict[str, Any]) -> GameConfig:
    """Build and validate a config from plain data."""
    known = {f.name for f in fields(GameConfig)}
    if unknown := set(data) - known:
        raise ConfigError(sorted(unknown)[0], "unknown config key")
    kwargs = dict(data)
    try:
        if isinstance(eta := kwargs.get("eta"), dict):
            eta0 = eta["eta0"]
            kwargs["eta"] = EtaSchedule(
                eta0=tuple(eta0) if isinstance(eta0, list) else eta0,
                kappa=eta.get("kappa", 1.0),
            )
        if isinstance(spec := kwargs.get("reward_spec"), dict):
            kwargs["reward_spec"] = RewardSpec.from_dict(spec)
        config = GameConfig(**kwargs)
    except (TypeError, ValueError) as e:
        field_name = "reward_spec" if isinstance(e, RewardError) else "config"
        raise ConfigError(field_name, str(e)) from e
    return validate_config(config)


def load_config(path: JoinablePathLike) -> GameConfig:
    """Read a JSON config file."""
    text = UPath(path).read_text("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    return config_from_dict(data)


def dump_config(config: GameConfig, path: JoinablePathLike) -> None:
    """Write ``config`` as JSON."""
    target = UPath(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(config_to_dict(config), indent=2) + "\n", "utf-8")


def seeded_configs(config: GameConfig, seeds: Sequence[int]) -> list[GameConfig]:
    return [config.replace(seed=seed) for seed in seeds]
