"""Hedge stationary policy.

An agent with state ``s`` (its learned reward per arm) plays arm ``j`` with

    sigma(s, j) = (1 - eta) * softmax(beta * s)_j + eta / |M_i|

over its playable arms ``M_i``. States never accumulate, so the policy is
stationary in the state and the population can settle into an equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import softmax

from banditfield.exceptions import PolicyError


if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray


SIMPLEX_TOLERANCE = 1e-9


@dataclass(frozen=True, slots=True)
class PolicyParams:
    """Parameters of one agent's Hedge policy."""

    beta: float
    """Smoothing parameter (inverse temperature)."""

    eta: float = 0.0
    """Exploration weight at the current slot."""

    arm_subset: tuple[int, ...] | None = None
    """Playable arms (global indices); all arms when None."""

    def __post_init__(self) -> None:
        if not self.beta > 0:
            msg = f"beta must be positive, got {self.beta}"
            raise PolicyError(msg)
        if not 0.0 <= self.eta <= 1.0:
            msg = f"eta must lie in [0, 1], got {self.eta}"
            raise PolicyError(msg)
        if self.arm_subset is not None and not self.arm_subset:
            msg = "empty arm subset"
            raise PolicyError(msg)


@dataclass(frozen=True, slots=True)
class EtaSchedule:
    """Diminishing exploration ``eta_n = eta0 / (n + 1) ** kappa``.

    ``eta0`` may be a single value or one value per agent.
    """

    eta0: float | tuple[float, ...]
    kappa: float = 1.0

    def __post_init__(self) -> None:
        values = np.atleast_1d(np.asarray(self.eta0, dtype=float))
        if np.any(values < 0) or np.any(values > 1):
            msg = f"eta0 must lie in [0, 1], got {self.eta0}"
            raise PolicyError(msg)
        if not self.kappa > 0:
            msg = f"kappa must be positive, got {self.kappa}"
            raise PolicyError(msg)
        if not isinstance(self.eta0, int | float):
            object.__setattr__(self, "eta0", tuple(float(v) for v in self.eta0))

    def at(self, n: int) -> NDArray[np.float64]:
        return eta_schedule(n, np.asarray(self.eta0, dtype=float), self.kappa)


def _check_state(state: NDArray[np.float64]) -> None:
    if not np.all(np.isfinite(state)):
        msg = f"State has non-finite entries: {state}"
        raise PolicyError(msg)


def hedge_probabilities(state: ArrayLike, params: PolicyParams) -> NDArray[np.float64]:
    """Arm distribution of one agent.

    Args:
        state: Learned rewards of the agent's playable arms (length ``|M_i|``)
        params: Policy parameters

    Returns:
        Simplex vector over the same arms, each entry at least ``eta / |M_i|``
    """
    s = np.asarray(state, dtype=float)
    _check_state(s)
    if params.arm_subset is not None and len(params.arm_subset) != s.shape[-1]:
        msg = f"State has {s.shape[-1]} entries, arm subset has {len(params.arm_subset)}"
        raise PolicyError(msg)
    weights = softmax(params.beta * s, axis=-1)
    return (1.0 - params.eta) * weights + params.eta / s.shape[-1]


def hedge_profile(
    states: NDArray[np.float64],
    betas: NDArray[np.float64],
    etas: NDArray[np.float64],
    mask: NDArray[np.bool_] | None = None,
) -> NDArray[np.float64]:
    """Policy matrix of a whole population.

    Args:
        states: N x M state profile
        betas: Per-agent smoothing parameters (length N)
        etas: Per-agent exploration weights (length N)
        mask: Optional N x M playable-arm mask; masked arms get probability 0

    Returns:
        N x M matrix whose rows are the agents' Hedge distributions
    """
    _check_state(states)
    logits = betas[:, None] * states
    if mask is None:
        weights = softmax(logits, axis=1)
        sizes = np.full(states.shape[0], states.shape[1], dtype=float)
        return (1.0 - etas)[:, None] * weights + (etas / sizes)[:, None]
    weights = softmax(np.where(mask, logits, -np.inf), axis=1)
    sizes = mask.sum(axis=1).astype(float)
    return (1.0 - etas)[:, None] * weights + np.where(mask, (etas / sizes)[:, None], 0.0)


def _check_simplex(probs: NDArray[np.float64]) -> None:
    if (
        probs.ndim != 1
        or np.any(probs < -SIMPLEX_TOLERANCE)
        or abs(probs.sum() - 1.0) > SIMPLEX_TOLERANCE
    ):
        msg = f"Not a probability simplex: {probs}"
        raise PolicyError(msg)


def inverse_cdf(cdf: NDArray[np.float64], uniforms: NDArray[np.float64]) -> NDArray[np.intp]:
    """Map uniforms to indices using left-closed cumulative intervals.

    Index ``j`` is chosen when ``cdf[j - 1] <= u < cdf[j]`` for ``u`` in ``[0, 1)``.
    """
    # rescale so the last entry is exactly 1 and zero-probability tails are unreachable
    scaled = cdf / cdf[..., -1:]
    return np.sum(scaled <= uniforms[..., None], axis=-1)


def sample_arm(
    probs: ArrayLike,
    rng: np.random.Generator,
    arm_subset: Sequence[int] | None = None,
) -> int:
    """Draw one arm from ``probs``.

    Args:
        probs: Simplex vector
        rng: Generator consumed for exactly one uniform draw
        arm_subset: Global arm ids matching the entries of ``probs``

    Returns:
        Global arm index
    """
    p = np.asarray(probs, dtype=float)
    _check_simplex(p)
    local = int(inverse_cdf(np.cumsum(p), np.asarray(rng.random())))
    return int(arm_subset[local]) if arm_subset is not None else local


def policy_jacobian(state: ArrayLike, params: PolicyParams, arm: int) -> NDArray[np.float64]:
    """Gradient of ``sigma(x, arm)`` with respect to the state ``x``.

    Returns ``l -> (1 - eta) * beta * w(x, arm) * (1{arm == l} - w(x, l))`` where ``w`` is
    the softmax part of the policy; the uniform exploration term has no state dependence.
    """
    x = np.asarray(state, dtype=float)
    _check_state(x)
    weights = softmax(params.beta * x)
    indicator = np.zeros_like(weights)
    indicator[arm] = 1.0
    return (1.0 - params.eta) * params.beta * weights[arm] * (indicator - weights)


def eta_schedule[T: (float, NDArray[np.float64])](n: int, eta0: T, kappa: float) -> T:
    """Diminishing exploration weight ``eta0 / (n + 1) ** kappa``."""
    if n < 0:
        msg = f"Slot index must be non-negative, got {n}"
        raise PolicyError(msg)
    return eta0 / float(n + 1) ** kappa  # type: ignore[return-value]


def random_betas(
    num_agents: int,
    low: float,
    high: float,
    rng: np.random.Generator,
) -> tuple[float, ...]:
    """Draw heterogeneous smoothing parameters uniformly from ``[low, high]``."""
    if not 0 < low <= high:
        msg = f"Need 0 < low <= high, got ({low}, {high})"
        raise PolicyError(msg)
    return tuple(float(b) for b in rng.uniform(low, high, size=num_agents))
