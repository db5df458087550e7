"""Numerical checks of the convergence results for the bandit game.

Contains the closed-form contraction conditions, an empirical Lipschitz
estimate of the reward mapping, the cumulative state change inequality, the
population variance bound at an equilibrium and the distance-to-equilibrium
series of a run. Check outcomes can be collected into a CSV report.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
from scipy.special import logsumexp
from upath import UPath

from banditfield.core import as_state, init_state_profile, make_rng, resolve_config
from banditfield.exceptions import AnalysisError
from banditfield.log import get_logger
from banditfield.meanfield import expected_reward_vector, solve_mfe
from banditfield.policy import EtaSchedule, hedge_profile, inverse_cdf
from banditfield.reward import require_declared


if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

    from numpy.typing import ArrayLike, NDArray
    from upath.types import JoinablePathLike

    from banditfield.core import GameConfig, RunTrace, StateProfile
    from banditfield.reward import RewardKind


logger = get_logger(__name__)

type EstimateMode = Literal["mean-field", "monte-carlo"]

EULER_EXCESS = math.e - 2.0
"""Coefficient of ``y**2`` in ``exp(y) <= 1 + y + (e - 2) y**2`` for ``y <= 1``."""

CLUSTER_RESOLUTION = 1e-4
REPORT_HEADER = ("check", "inputs", "passed", "margin")

REFERENCE_PRESETS: dict[tuple[RewardKind, bool], tuple[float, float, float]] = {
    ("general", True): (0.5, 0.5, 0.2),
    ("general", False): (0.5, 30.0, 0.2),
    ("linear", True): (1.0, 2.0, 0.2),
    ("linear", False): (1.0, 40.0, 0.2),
}
"""``(theta, beta, eta)`` of the reference experiments, keyed by (reward, contraction)."""


@dataclass(frozen=True, slots=True)
class ContractionVerdict:
    satisfied: bool
    margin: float

    def __iter__(self) -> Iterator[bool | float]:
        return iter((self.satisfied, self.margin))


@dataclass(frozen=True, slots=True)
class CheckResult:
    """One row of a check report."""

    check: str
    inputs: dict[str, Any] = field(default_factory=dict)
    passed: bool = True
    margin: float = math.nan

    def as_row(self) -> tuple[str, str, bool, str]:
        inputs = ";".join(f"{k}={v}" for k, v in self.inputs.items())
        return self.check, inputs, self.passed, repr(float(self.margin))


@dataclass(frozen=True, slots=True)
class StateChangeSeries:
    """Both sides of the cumulative state change inequality for K = 0 .. T-1."""

    lhs: NDArray[np.float64]
    rhs: NDArray[np.float64]

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs + 1e-9))

    @property
    def worst_gap(self) -> float:
        """Smallest ``rhs - lhs`` over all K (negative means violated)."""
        if self.lhs.size == 0:
            return math.inf
        return float(np.min(self.rhs - self.lhs))


@dataclass(frozen=True, slots=True)
class VarianceReport:
    """Population variance at an equilibrium."""

    empirical: NDArray[np.float64]
    """Per-arm sample variance of the population fraction."""

    analytic: NDArray[np.float64]
    """Per-arm exact variance ``sum_i sigma(1 - sigma) / N**2``."""

    bound: float
    """Uniform bound ``1 / (4N)``."""

    mfe: StateProfile

    def within(self, slack: float = 1.0) -> bool:
        return bool(np.all(self.empirical <= slack * self.bound))


def _verdict(margin: float) -> ContractionVerdict:
    return ContractionVerdict(satisfied=margin > 0, margin=margin)


def _check_inputs(theta: float, beta: float, eta: float) -> None:
    if theta < 0 or beta <= 0 or not 0 <= eta <= 1:
        msg = f"Need theta >= 0, beta > 0, eta in [0, 1]; got ({theta}, {beta}, {eta})"
        raise ValueError(msg)


def contraction_check_general(theta: float, beta: float, eta: float) -> ContractionVerdict:
    """Contraction condition ``4 theta (1 - eta) beta < 1`` of the general reward."""
    _check_inputs(theta, beta, eta)
    return _verdict(1.0 - 4.0 * theta * (1.0 - eta) * beta)


def contraction_check_linear(theta: float, beta: float, eta: float) -> ContractionVerdict:
    """Contraction condition ``theta (1 - eta) beta / 2 < 1`` of the linear reward."""
    _check_inputs(theta, beta, eta)
    return _verdict(1.0 - theta * (1.0 - eta) * beta / 2.0)


def contraction_check_heterogeneous(
    theta: float,
    betas: ArrayLike,
    linear: bool = False,
) -> ContractionVerdict:
    """Contraction condition for per-agent betas and vanishing exploration.

    The homogeneous condition with ``eta = 0`` evaluated at the largest beta.
    """
    values = np.asarray(betas, dtype=float)
    if values.size == 0 or np.any(values <= 0):
        msg = "Every beta must be positive"
        raise ValueError(msg)
    beta_max = float(values.max())
    if linear:
        return contraction_check_linear(theta, beta_max, 0.0)
    return contraction_check_general(theta, beta_max, 0.0)


def check_config(config: GameConfig) -> ContractionVerdict:
    """Closed-form contraction verdict matching a configuration.

    Raises:
        AnalysisError: For custom rewards, which have no closed-form condition
    """
    spec = config.reward_spec
    if spec.kind == "custom":
        msg = "No closed-form contraction condition for custom rewards"
        raise AnalysisError(msg)
    linear = spec.kind == "linear"
    if isinstance(config.eta, EtaSchedule):
        return contraction_check_heterogeneous(spec.theta, config.betas(), linear=linear)
    # constant eta: the condition binds at the largest beta
    eta = float(config.eta)
    beta = float(config.betas().max())
    if linear:
        return contraction_check_linear(spec.theta, beta, eta)
    return contraction_check_general(spec.theta, beta, eta)


def empirical_contraction_estimate(
    config: GameConfig,
    num_pairs: int,
    rng: np.random.Generator,
    mode: EstimateMode = "mean-field",
    samples: int = 10_000,
) -> float:
    """Largest observed Lipschitz ratio of the expected reward mapping.

    Draws ``num_pairs`` random state profiles pairs and returns
    ``max ||R(s_a) - R(s_b)||_inf / ||s_a - s_b||_inf``. Monte-Carlo mode draws
    ``samples`` action profiles per evaluation with common random numbers for
    both members of a pair.

    Raises:
        RewardError: For custom rewards without declared constant and range
    """
    if num_pairs < 1:
        msg = f"num_pairs must be at least 1, got {num_pairs}"
        raise ValueError(msg)
    require_declared(config.reward_spec)
    config = resolve_config(config)
    estimate = 0.0
    for _ in range(num_pairs):
        s_a = init_state_profile(config, rng).values
        s_b = init_state_profile(config, rng).values
        distance = float(np.max(np.abs(s_a - s_b)))
        if distance == 0:
            continue
        if mode == "monte-carlo":
            seed = int(rng.integers(2**63))
            r_a = expected_reward_vector(
                s_a, config, samples=samples, rng=np.random.default_rng(seed)
            )
            r_b = expected_reward_vector(
                s_b, config, samples=samples, rng=np.random.default_rng(seed)
            )
        else:
            r_a = expected_reward_vector(s_a, config)
            r_b = expected_reward_vector(s_b, config)
        estimate = max(estimate, float(np.max(np.abs(r_a - r_b))) / distance)
    return estimate


def state_change_series(trace: RunTrace, agent: int, arm: int) -> StateChangeSeries:
    """Both sides of the cumulative state change inequality for every K.

    With ``delta_n = s_{n+1} - s_n`` of the agent:

        lhs_K = beta s_0(j) + sum_{n<=K} beta delta_n(j) - log sum_l exp(beta s_0(l))
        rhs_K = sum_{n<=K} [beta (sigma_n - eta_n / m) . delta_n / (1 - eta_n)
                 + (e - 2) beta**2 sigma_n . delta_n**2 / (1 - eta_n)]

    over the agent's ``m`` playable arms, using the agent's own beta and
    exploration weights.

    Raises:
        TraceError: If the trace is thinned
        AnalysisError: If an exploration weight equals 1 or the arm is not playable
    """
    trace.require_full()
    config = trace.config
    subsets = config.arm_subsets
    arms = list(subsets[agent]) if subsets is not None else list(range(config.num_arms))
    if arm not in arms:
        msg = f"Arm {arm} is not playable by agent {agent}"
        raise AnalysisError(msg)
    local = arms.index(arm)
    horizon = trace.horizon
    etas = np.asarray([config.etas(n)[agent] for n in range(horizon)])
    if np.any(etas >= 1.0):
        msg = "Exploration weight 1 leaves the bound undefined"
        raise AnalysisError(msg)
    beta = float(config.betas()[agent])
    states = trace.states[:, agent, arms]
    deltas = np.diff(states, axis=0)
    probs = trace.probabilities[:horizon, agent, arms]
    size = len(arms)

    offset = beta * states[0, local] - float(logsumexp(beta * states[0]))
    lhs = offset + beta * np.cumsum(deltas[:, local])
    first = beta * np.sum((probs - etas[:, None] / size) * deltas, axis=1)
    second = EULER_EXCESS * beta**2 * np.sum(probs * deltas**2, axis=1)
    rhs = np.cumsum((first + second) / (1.0 - etas))
    return StateChangeSeries(lhs=lhs, rhs=rhs)


def state_change_bound(trace: RunTrace, agent: int, arm: int, k: int) -> tuple[float, float]:
    """``(lhs, rhs)`` of the cumulative state change inequality at slot ``k``."""
    if not 0 <= k < trace.horizon:
        msg = f"Need 0 <= K < T={trace.horizon}, got {k}"
        raise AnalysisError(msg)
    series = state_change_series(trace, agent, arm)
    return float(series.lhs[k]), float(series.rhs[k])


def population_variance_check(
    config: GameConfig,
    num_samples: int,
    rng: np.random.Generator | None = None,
    **solver_options: Any,
) -> VarianceReport:
    """Sample the population profile at the equilibrium and compare to ``1/(4N)``.

    Raises:
        AnalysisError: If the equilibrium solver does not converge
    """
    if num_samples < 30:  # noqa: PLR2004
        msg = f"num_samples must be at least 30, got {num_samples}"
        raise ValueError(msg)
    config = resolve_config(config)
    solution = solve_mfe(config, **solver_options)
    if not solution.converged:
        msg = f"Equilibrium not found (residual {solution.residual:.3g})"
        raise AnalysisError(msg)
    rng = rng or make_rng(config.seed)
    n_agents, n_arms = config.num_agents, config.num_arms
    probs = hedge_profile(
        solution.state.values, config.betas(), config.limit_etas(), config.arm_mask()
    )
    cdf = np.cumsum(probs, axis=1)
    actions = inverse_cdf(cdf[None, :, :], rng.random((num_samples, n_agents)))
    counts = np.stack([np.bincount(row, minlength=n_arms) for row in actions])
    fractions = counts / n_agents
    return VarianceReport(
        empirical=fractions.var(axis=0, ddof=1),
        analytic=np.sum(probs * (1.0 - probs), axis=0) / n_agents**2,
        bound=1.0 / (4.0 * n_agents),
        mfe=solution.state,
    )


def convergence_distance_series(
    trace: RunTrace,
    mfe: StateProfile | NDArray[np.float64],
) -> NDArray[np.float64]:
    """Distance ``e_n = ||s_n - s_bar||_inf`` at every kept state snapshot."""
    target = as_state(mfe)
    if trace.states.shape[1:] != target.shape:
        msg = f"Trace states {trace.states.shape[1:]} do not match {target.shape}"
        raise ValueError(msg)
    return np.max(np.abs(trace.states - target[None]), axis=(1, 2))


def cluster_states(
    states: Sequence[StateProfile | NDArray[np.float64]],
    resolution: float = CLUSTER_RESOLUTION,
) -> tuple[list[int], list[NDArray[np.float64]]]:
    """Group profiles lying within ``resolution`` (sup norm) of a representative.

    Returns:
        Cluster label of each input and the representative of each cluster
    """
    labels: list[int] = []
    centers: list[NDArray[np.float64]] = []
    for state in states:
        values = as_state(state)
        for label, center in enumerate(centers):
            if np.max(np.abs(values - center)) <= resolution:
                labels.append(label)
                break
        else:
            labels.append(len(centers))
            centers.append(values)
    return labels, centers


def write_check_report(results: Iterable[CheckResult], path: JoinablePathLike) -> UPath:
    """Write check results as CSV with columns check, inputs, passed, margin."""
    target = UPath(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    rows = [r.as_row() for r in results]
    with target.open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(REPORT_HEADER)
        writer.writerows(rows)
    failed = sum(not row[2] for row in rows)
    if failed:
        logger.info("%d of %d checks failed, see %s", failed, len(rows), target)
    return target
