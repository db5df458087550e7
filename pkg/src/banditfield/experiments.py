"""Experiment batches behind the commands.

Every function here is synchronous and picklable so seed batches can be
farmed out to worker processes.
"""

from __future__ import annotations

import asyncio
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import json
from typing import TYPE_CHECKING, Any

import numpy as np
from upath import UPath

from banditfield.analysis import (
    REFERENCE_PRESETS,
    CheckResult,
    check_config,
    cluster_states,
    convergence_distance_series,
    population_variance_check,
    state_change_series,
    write_check_report,
)
from banditfield.core import (
    ANALYSIS_STREAM,
    GameConfig,
    config_to_dict,
    init_state_profile,
    resolve_config,
)
from banditfield.exceptions import AnalysisError
from banditfield.log import get_logger
from banditfield.meanfield import (
    integrate_ode,
    interpolated_process,
    lyapunov_series,
    pseudotrajectory_distance,
    solve_mfe,
)
from banditfield.reward import RewardSpec
from banditfield.sim import agent_regrets, cumulative_reward, export_trace, run, state_rows


if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Sequence

    from upath.types import JoinablePathLike

    from banditfield.meanfield import MfeSolution
    from banditfield.reward import RewardKind


logger = get_logger(__name__)

TABLE_ARMS = 4
TABLE_HORIZON = 2000
TABLE_HEADER = ("reward", "N", "regret", "regret_max", "rewards", "runs", "seed_list")
CHECKPOINT_FRACTIONS = (0.1, 0.5, 0.9)
CHECKPOINT_WINDOW = 1.0
LYAPUNOV_TOLERANCE = 1e-8
TERMINAL_THRESHOLD = 0.05
DIAGNOSE_FILES = (
    "distance.csv",
    "lyapunov.csv",
    "pseudotrajectory.csv",
    "state_change.csv",
    "variance.csv",
    "ode_states.csv",
    "checks.csv",
)


@dataclass(frozen=True, slots=True)
class SeedSummary:
    """Outcome of one exported run."""

    seed: int
    regret_mean: float
    regret_max: float
    cumulative_reward: float
    terminal_state: list[list[float]]
    arm_thetas: list[float]
    files: list[str] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class TableRun:
    """One (reward, N, seed) cell of a regret table."""

    reward: str
    num_agents: int
    seed: int
    regret_mean: float
    regret_max: float
    cumulative_reward: float


def write_csv(
    path: JoinablePathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> UPath:
    target = UPath(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(header)
        writer.writerows(rows)
    return target


async def map_jobs[T](
    fn: Callable[..., T],
    jobs: Sequence[tuple[Any, ...]],
    workers: int = 1,
) -> list[T]:
    """Run ``fn(*job)`` for every job, in worker processes when ``workers > 1``.

    Results keep the order of ``jobs``.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [loop.run_in_executor(pool, fn, *job) for job in jobs]
        return list(await asyncio.gather(*futures))


def run_seed(config: GameConfig, out_dir: str, smooth: int = 0) -> SeedSummary:
    """Simulate one seed and export its trace to ``<out_dir>/seed-<k>/``."""
    trace = run(config)
    regrets = agent_regrets(trace)
    summary = {
        "regret_mean": float(regrets.mean()),
        "regret_max": float(regrets.max()),
        "cumulative_reward": cumulative_reward(trace),
    }
    paths = export_trace(
        trace,
        UPath(out_dir) / f"seed-{config.seed}",
        smooth=smooth,
        extra_header=summary,
    )
    logger.info("Seed %d: mean regret %.3f", config.seed, summary["regret_mean"])
    return SeedSummary(
        seed=config.seed,
        terminal_state=trace.terminal_state.values.tolist(),
        arm_thetas=list(trace.config.reward_spec.arm_thetas or []),
        files=[str(p) for p in paths],
        **summary,
    )


def write_manifest(
    config: GameConfig,
    summaries: Sequence[SeedSummary],
    out_dir: JoinablePathLike,
    checks: Sequence[CheckResult],
) -> UPath:
    """Write ``manifest.json`` describing a run batch."""
    target = UPath(out_dir) / "manifest.json"
    data = {
        "config": config_to_dict(config),
        "seeds": [s.seed for s in summaries],
        "arm_thetas": {str(s.seed): s.arm_thetas for s in summaries},
        "runs": {
            str(s.seed): {
                "regret_mean": s.regret_mean,
                "regret_max": s.regret_max,
                "cumulative_reward": s.cumulative_reward,
            }
            for s in summaries
        },
        "checks": [
            {"check": c.check, "passed": c.passed, "margin": c.margin, **c.inputs} for c in checks
        ],
    }
    target.write_text(json.dumps(data, indent=2) + "\n", "utf-8")
    return target


def contraction_result(config: GameConfig) -> CheckResult:
    spec = config.reward_spec
    inputs: dict[str, Any] = {"reward": spec.kind, "theta": spec.theta}
    try:
        verdict = check_config(config)
    except AnalysisError:
        return CheckResult("contraction", inputs, passed=False)
    inputs.update(beta="per-agent" if isinstance(config.beta, tuple) else config.beta)
    return CheckResult("contraction", inputs, verdict.satisfied, verdict.margin)


def terminal_spread(summaries: Sequence[SeedSummary]) -> float:
    """Largest sup-norm distance between terminal states of two seeds."""
    states = [np.asarray(s.terminal_state) for s in summaries]
    spread = 0.0
    for a in range(len(states)):
        for b in range(a + 1, len(states)):
            spread = max(spread, float(np.max(np.abs(states[a] - states[b]))))
    return spread


def table_config(
    kind: RewardKind,
    contraction: bool,
    num_agents: int,
    seed: int,
    horizon: int = TABLE_HORIZON,
    base: GameConfig | None = None,
) -> GameConfig:
    """Reference experiment setup for one table cell."""
    theta, beta, eta = REFERENCE_PRESETS[kind, contraction]
    if base is None:
        base = GameConfig(num_agents=num_agents, num_arms=TABLE_ARMS, horizon=horizon)
    return base.replace(
        num_agents=num_agents,
        horizon=horizon,
        beta=beta,
        eta=eta,
        reward_spec=RewardSpec(kind=kind, theta=theta),
        seed=seed,
    )


def table_run(config: GameConfig) -> TableRun:
    trace = run(config)
    regrets = agent_regrets(trace)
    return TableRun(
        reward=config.reward_spec.kind,
        num_agents=config.num_agents,
        seed=config.seed,
        regret_mean=float(regrets.mean()),
        regret_max=float(regrets.max()),
        cumulative_reward=cumulative_reward(trace),
    )


def table_rows(runs: Sequence[TableRun]) -> list[tuple[Any, ...]]:
    """Aggregate per-seed runs into table rows.

    Columns: reward, N, regret (agent mean), regret_max (worst agent), rewards,
    runs, seed_list; regrets and rewards are averaged over seeds.
    """
    groups: dict[tuple[str, int], list[TableRun]] = {}
    for r in runs:
        groups.setdefault((r.reward, r.num_agents), []).append(r)
    return [
        (
            reward,
            n,
            repr(float(np.mean([r.regret_mean for r in cell]))),
            repr(float(np.mean([r.regret_max for r in cell]))),
            repr(float(np.mean([r.cumulative_reward for r in cell]))),
            len(cell),
            " ".join(str(r.seed) for r in cell),
        )
        for (reward, n), cell in groups.items()
    ]


def mfe_from_starts(
    config: GameConfig,
    starts: int,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    damping: float = 0.5,
) -> list[MfeSolution]:
    """Solve for the equilibrium from ``starts`` independent random profiles."""
    config = resolve_config(config)
    solutions = []
    for k in range(starts):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, ANALYSIS_STREAM, k]))
        initial = init_state_profile(config, rng)
        solutions.append(solve_mfe(config, tol, max_iter, damping, initial=initial))
    return solutions


def write_mfe_report(
    config: GameConfig,
    solutions: Sequence[MfeSolution],
    out_dir: JoinablePathLike,
) -> tuple[list[UPath], int]:
    """Write mfe.csv, mfe_states.csv and checks.csv; return paths and cluster count."""
    out = UPath(out_dir)
    labels, centers = cluster_states([s.state for s in solutions])
    mfe_path = write_csv(
        out / "mfe.csv",
        ("start", "converged", "residual", "iterations", "cluster"),
        (
            (k, s.converged, repr(s.residual), s.iterations, label)
            for k, (s, label) in enumerate(zip(solutions, labels))
        ),
    )
    states_path = write_csv(
        out / "mfe_states.csv",
        ("cluster", "agent", "arm", "value"),
        state_rows(range(len(centers)), np.asarray(centers)),
    )
    verdict = contraction_result(config)
    checks = [
        verdict,
        CheckResult(
            "all_converged",
            {"starts": len(solutions)},
            all(s.converged for s in solutions),
            float(sum(s.converged for s in solutions)),
        ),
        CheckResult(
            "unique_equilibrium",
            {"clusters": len(centers), "report_only": not verdict.passed},
            len(centers) == 1 or not verdict.passed,
            float(len(centers)),
        ),
    ]
    check_path = write_check_report(checks, out / "checks.csv")
    return [mfe_path, states_path, check_path], len(centers)


def diagnose(
    config: GameConfig,
    out_dir: JoinablePathLike,
    *,
    t_end: float = 50.0,
    dt: float = 0.01,
    agent: int = 0,
    arm: int = 0,
    samples: int = 200,
) -> tuple[list[UPath], list[CheckResult]]:
    """Run one simulation plus the ODE and write the diagnostics bundle."""
    out = UPath(out_dir)
    config = resolve_config(config.replace(snapshot_stride=1))
    trace = run(config)
    mfe = solve_mfe(config)
    if not mfe.converged:
        msg = f"Equilibrium not found (residual {mfe.residual:.3g})"
        raise AnalysisError(msg)
    written = []

    distances = convergence_distance_series(trace, mfe.state)
    written.append(
        write_csv(
            out / "distance.csv",
            ("n", "distance"),
            zip(trace.state_slots.tolist(), map(repr, distances.tolist())),
        )
    )

    ode = integrate_ode(trace.initial_state, config, t_end, dt)
    lyapunov = lyapunov_series(ode, mfe.state)
    written.append(
        write_csv(
            out / "lyapunov.csv",
            ("t", "value"),
            zip(map(repr, ode.times.tolist()), map(repr, lyapunov.tolist())),
        )
    )

    interp = interpolated_process(trace, config.schedule)
    window = min(CHECKPOINT_WINDOW, interp.t_end)
    checkpoints = []
    for fraction in CHECKPOINT_FRACTIONS:
        t = min(fraction * interp.t_end, interp.t_end - window)
        checkpoints.append((fraction, t, pseudotrajectory_distance(interp, config, t, window, dt)))
    written.append(
        write_csv(
            out / "pseudotrajectory.csv",
            ("checkpoint", "t", "window", "distance"),
            ((f, repr(t), window, repr(d)) for f, t, d in checkpoints),
        )
    )

    series = state_change_series(trace, agent, arm)
    written.append(
        write_csv(
            out / "state_change.csv",
            ("k", "lhs", "rhs"),
            zip(
                range(trace.horizon),
                map(repr, series.lhs.tolist()),
                map(repr, series.rhs.tolist()),
            ),
        )
    )

    variance = population_variance_check(config, samples)
    written.append(
        write_csv(
            out / "variance.csv",
            ("arm", "empirical", "analytic", "bound"),
            (
                (j, repr(float(e)), repr(float(a)), repr(variance.bound))
                for j, (e, a) in enumerate(zip(variance.empirical, variance.analytic))
            ),
        )
    )

    written.append(
        write_csv(
            out / "ode_states.csv",
            ("t", "agent", "arm", "value"),
            state_rows(ode.times, ode.states),
        )
    )

    increments = np.diff(lyapunov)
    checkpoint_distances = [d for _, _, d in checkpoints]
    checks = [
        contraction_result(config),
        CheckResult(
            "lyapunov_non_increasing",
            {"tolerance": LYAPUNOV_TOLERANCE},
            bool(np.all(increments <= LYAPUNOV_TOLERANCE)),
            float(-increments.max()) if increments.size else 0.0,
        ),
        CheckResult(
            "state_change_bound",
            {"agent": agent, "arm": arm},
            series.holds,
            series.worst_gap,
        ),
        CheckResult(
            "pseudotrajectory_decreasing",
            {"window": window},
            all(a > b for a, b in zip(checkpoint_distances, checkpoint_distances[1:])),
            checkpoint_distances[0] - checkpoint_distances[-1],
        ),
        CheckResult(
            "variance_bound",
            {"samples": samples, "slack": 2},
            variance.within(slack=2.0),
            2.0 * variance.bound - float(variance.empirical.max()),
        ),
        CheckResult(
            "analytic_variance_bound",
            {"num_agents": config.num_agents},
            bool(np.all(variance.analytic <= variance.bound)),
            variance.bound - float(variance.analytic.max()),
        ),
        CheckResult(
            "terminal_distance",
            {"horizon": config.horizon, "threshold": TERMINAL_THRESHOLD},
            float(distances[-1]) <= TERMINAL_THRESHOLD,
            TERMINAL_THRESHOLD - float(distances[-1]),
        ),
    ]
    written.append(write_check_report(checks, out / "checks.csv"))
    return written, checks
