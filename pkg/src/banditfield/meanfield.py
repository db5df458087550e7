"""Deterministic mean-field side of the bandit game.

The continuous-time state profile follows

    ds^i(j)/dt = sigma(s^i, j) * (r(f(s), j) - s^i(j))

with ``f(s)`` the population profile expected under the agents' policies. A mean
field equilibrium is a profile with ``s^i(j) = r(f(s), j)`` for every agent and
arm. The stochastic game is linked to the ODE through its interpolated process,
whose windowed distance to the ODE flow vanishes as the stepsizes shrink.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
from typing import TYPE_CHECKING

import numpy as np

from banditfield.core import (
    StateProfile,
    as_state,
    init_state_profile,
    make_rng,
    resolve_config,
)
from banditfield.exceptions import IntegrationError, TraceError
from banditfield.log import get_logger
from banditfield.policy import hedge_profile, inverse_cdf
from banditfield.reward import reward_vector


if TYPE_CHECKING:
    from numpy.typing import NDArray

    from banditfield.core import GameConfig, RunTrace, StepsizeSchedule


logger = get_logger(__name__)

OVERSHOOT_TOLERANCE = 1e-9
DEFAULT_DT = 0.01
DEFAULT_T_END = 50.0


@dataclass(frozen=True, slots=True)
class OdeTrajectory:
    """Piecewise-linear state path sampled at increasing times."""

    times: NDArray[np.float64]
    states: NDArray[np.float64]

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) != len(self.states):
            msg = "times and states must have matching length"
            raise ValueError(msg)
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            msg = "times must be strictly increasing"
            raise ValueError(msg)
        object.__setattr__(self, "times", times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def terminal_state(self) -> StateProfile:
        return StateProfile(self.states[-1])

    def at(self, t: float) -> NDArray[np.float64]:
        """State at time ``t`` by linear interpolation between samples."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            msg = f"t={t} outside [{self.times[0]}, {self.times[-1]}]"
            raise ValueError(msg)
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 1)
        if k == len(self.times) - 1:
            return self.states[k]
        t0, t1 = self.times[k], self.times[k + 1]
        weight = (t - t0) / (t1 - t0)
        return self.states[k] + weight * (self.states[k + 1] - self.states[k])


@dataclass(frozen=True, slots=True)
class MfeSolution:
    """Result of a fixed-point search."""

    state: StateProfile
    residual: float
    iterations: int
    converged: bool


def _policies(state: NDArray[np.float64], config: GameConfig) -> NDArray[np.float64]:
    return hedge_profile(state, config.betas(), config.limit_etas(), config.arm_mask())


def mean_population(
    state: StateProfile | NDArray[np.float64],
    config: GameConfig,
) -> NDArray[np.float64]:
    """Expected population profile ``f(j) = (1/N) sum_i sigma(s^i, j)``.

    Agents that cannot play ``j`` contribute nothing, the divisor stays N.
    """
    return _policies(as_state(state), config).mean(axis=0)


def expected_reward_vector(
    state: StateProfile | NDArray[np.float64],
    config: GameConfig,
    *,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> NDArray[np.float64]:
    """Per-arm reward under the agents' policies.

    With ``samples=None`` this is the deterministic closure ``r(f(s), j)``.
    Otherwise ``samples`` action profiles are drawn from the policies and the
    realized rewards averaged, estimating ``E[r(f, j)]``.
    """
    spec = config.reward_spec
    if samples is None:
        return reward_vector(spec, mean_population(state, config))
    rng = rng or make_rng(config.seed)
    probs = _policies(as_state(state), config)
    cdf = np.cumsum(probs, axis=1)
    uniforms = rng.random((samples, config.num_agents))
    actions = inverse_cdf(cdf[None, :, :], uniforms)
    counts = np.apply_along_axis(np.bincount, 1, actions, minlength=config.num_arms)
    profiles = counts / config.num_agents
    return reward_vector(spec, profiles).mean(axis=0)


def best_response_state(state: NDArray[np.float64], config: GameConfig) -> NDArray[np.float64]:
    """The map ``R(s)^i(j) = r(f(s), j)`` whose fixed points are the equilibria."""
    rewards = expected_reward_vector(state, config)
    target = np.broadcast_to(rewards, state.shape)
    mask = config.arm_mask()
    return np.where(mask, target, 0.0) if mask is not None else target.copy()


def ode_rhs(state: StateProfile | NDArray[np.float64], config: GameConfig) -> NDArray[np.float64]:
    """Time derivative ``sigma(s^i, j) * (r(f(s), j) - s^i(j))``."""
    s = as_state(state)
    probs = _policies(s, config)
    rewards = reward_vector(config.reward_spec, probs.mean(axis=0))
    return probs * (rewards[None, :] - s)


def _rk4_step(s: NDArray[np.float64], config: GameConfig, h: float) -> NDArray[np.float64]:
    k1 = ode_rhs(s, config)
    k2 = ode_rhs(s + 0.5 * h * k1, config)
    k3 = ode_rhs(s + 0.5 * h * k2, config)
    k4 = ode_rhs(s + h * k3, config)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _checked(s: NDArray[np.float64], t: float) -> NDArray[np.float64]:
    if not np.all(np.isfinite(s)):
        msg = f"Non-finite state at t={t:.6g}"
        raise IntegrationError(msg)
    overshoot = max(-float(s.min()), float(s.max()) - 1.0)
    if overshoot > OVERSHOOT_TOLERANCE:
        msg = f"State left [0, 1] by {overshoot:.3g} at t={t:.6g}; reduce dt"
        raise IntegrationError(msg)
    return np.clip(s, 0.0, 1.0)


def integrate_ode(
    initial: StateProfile | NDArray[np.float64],
    config: GameConfig,
    t_end: float = DEFAULT_T_END,
    dt: float = DEFAULT_DT,
    *,
    record_every: int = 1,
) -> OdeTrajectory:
    """Integrate the mean-field ODE with the classical 4th-order Runge-Kutta scheme.

    The interval is split into ``ceil(t_end / dt)`` equal steps, so ``dt`` is an
    upper bound on the step actually taken and the last sample sits at ``t_end``.

    Args:
        initial: Start profile
        config: Configuration providing policies and reward
        t_end: Final time
        dt: Maximal step size
        record_every: Keep every k-th step in the returned trajectory

    Raises:
        IntegrationError: If the state becomes non-finite or leaves [0, 1] by
            more than rounding
    """
    if t_end <= 0 or dt <= 0:
        msg = f"Need t_end > 0 and dt > 0, got t_end={t_end}, dt={dt}"
        raise ValueError(msg)
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / steps
    s = _checked(as_state(initial).copy(), 0.0)
    times = [0.0]
    states = [s]
    for k in range(1, steps + 1):
        s = _checked(_rk4_step(s, config, h), k * h)
        if k % record_every == 0 or k == steps:
            times.append(k * h)
            states.append(s)
    return OdeTrajectory(np.asarray(times), np.asarray(states))


def solve_mfe(
    config: GameConfig,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    damping: float = 0.5,
    *,
    initial: StateProfile | NDArray[np.float64] | None = None,
    symmetric: bool = False,
) -> MfeSolution:
    """Find a mean field equilibrium by damped fixed-point iteration.

    Iterates ``s <- (1 - damping) * s + damping * R(s)`` until
    ``||R(s) - s||_inf <= tol``. Non-convergence is reported through the
    ``converged`` flag, not raised.

    Args:
        config: Game configuration (arm thetas drawn from its seed if unset)
        tol: Residual tolerance
        max_iter: Iteration budget
        damping: Step toward ``R(s)`` in (0, 1]
        initial: Start profile; drawn from the config's seed if None
        symmetric: Iterate a single M-vector shared by all agents (homogeneous
            agents without arm subsets only) and broadcast the result
    """
    if not 0 < damping <= 1:
        msg = f"damping must lie in (0, 1], got {damping}"
        raise ValueError(msg)
    config = resolve_config(config)
    start = as_state(initial) if initial is not None else init_state_profile(config).values
    if symmetric:
        if config.is_heterogeneous or config.arm_subsets is not None:
            msg = "Symmetric reduction needs homogeneous agents without arm subsets"
            raise ValueError(msg)
        reduced = config.replace(num_agents=1)
        solution = solve_mfe(
            reduced, tol, max_iter, damping, initial=start.mean(axis=0, keepdims=True)
        )
        full = np.repeat(solution.state.values, config.num_agents, axis=0)
        return replace(solution, state=StateProfile(full))

    s = start.copy()
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):  # noqa: B007
        target = best_response_state(s, config)
        residual = float(np.max(np.abs(target - s)))
        if residual <= tol:
            iterations -= 1
            break
        s = (1.0 - damping) * s + damping * target
    converged = residual <= tol
    if not converged:
        msg = "Fixed-point iteration stopped at residual %.3g after %d steps"
        logger.warning(msg, residual, iterations)
    return MfeSolution(StateProfile(s), residual, iterations, converged)


def lyapunov_series(
    traj: OdeTrajectory,
    mfe: StateProfile | NDArray[np.float64],
) -> NDArray[np.float64]:
    """``V(s_t) = ||s_t - s_bar||_inf`` at every trajectory time."""
    target = as_state(mfe)
    if traj.states.shape[1:] != target.shape:
        msg = f"Trajectory states {traj.states.shape[1:]} do not match {target.shape}"
        raise ValueError(msg)
    return np.max(np.abs(traj.states - target[None]), axis=(1, 2))


def lyapunov_decay_rate(times: NDArray[np.float64], values: NDArray[np.float64]) -> float:
    """Least-squares slope of ``log V`` against time (negative for exponential decay)."""
    positive = values > 0
    if positive.sum() < 2:  # noqa: PLR2004
        return 0.0
    slope, _ = np.polyfit(times[positive], np.log(values[positive]), 1)
    return float(slope)


def interpolated_process(trace: RunTrace, schedule: StepsizeSchedule) -> OdeTrajectory:
    """Embed the discrete iterates in continuous time.

    Knots sit at ``tau_n = sum_{k<n} gamma_k`` with ``s_n`` as value; between
    knots the path is linear.

    Raises:
        TraceError: If the trace is thinned
    """
    if not trace.is_full:
        msg = f"Interpolation needs every state snapshot, trace is thinned by {trace.stride}"
        raise TraceError(msg)
    times = schedule.knots(len(trace.states))
    return OdeTrajectory(times, trace.states)


def pseudotrajectory_distance(
    interp: OdeTrajectory,
    config: GameConfig,
    t: float,
    window: float,
    dt: float = DEFAULT_DT,
) -> float:
    """Windowed distance between a path and the ODE flow started on it.

    Integrates the ODE from ``interp(t)`` over ``[0, window]`` and returns
    ``sup_h ||interp(t + h) - flow_h(interp(t))||_inf`` over the integration grid.
    """
    if window == 0:
        return 0.0
    if t + window > interp.t_end + 1e-12:
        msg = f"Path ends at {interp.t_end}, window [{t}, {t + window}] exceeds it"
        raise ValueError(msg)
    flow = integrate_ode(interp.at(t), config, window, dt)
    distances = [
        float(np.max(np.abs(interp.at(min(t + h, interp.t_end)) - state)))
        for h, state in zip(flow.times, flow.states)
    ]
    return max(distances)
