"""Built-in experiment commands."""

from __future__ import annotations

from typing import TYPE_CHECKING, Annotated, Any, Literal

from upath import UPath

from banditfield.analysis import CheckResult, write_check_report
from banditfield.annotations import Short
from banditfield.commands.base import CommandContext  # noqa: TC001
from banditfield.commands.command import ExperimentCommand
from banditfield.core import load_config, seeded_configs
from banditfield.exceptions import CommandError
from banditfield.experiments import (
    DIAGNOSE_FILES,
    TABLE_HEADER,
    TABLE_HORIZON,
    contraction_result,
    diagnose,
    map_jobs,
    mfe_from_starts,
    run_seed,
    table_config,
    table_rows,
    table_run,
    terminal_spread,
    write_csv,
    write_manifest,
    write_mfe_report,
)
from banditfield.sim import TRACE_FILES


if TYPE_CHECKING:
    from banditfield.commands.base import BaseCommand


DEFAULT_RUN_SEEDS = 4
DEFAULT_TABLE_NS = (50, 100, 200)


def _require_seeds(seeds: list[int]) -> list[int]:
    if not seeds:
        msg = "no seeds given"
        raise CommandError(msg)
    if len(set(seeds)) != len(seeds):
        msg = f"duplicate seeds: {seeds}"
        raise CommandError(msg)
    return seeds


class RunCommand(ExperimentCommand):
    """Simulate a configuration for a batch of seeds and export the traces.

    Writes seed-<k>/{states,population,rewards}.csv and header.json per seed,
    plus manifest.json and checks.csv for the batch.

    Example: run --config game.json --seeds 1-4 --out runs/contraction
    """

    name = "run"

    async def execute_command(
        self,
        ctx: CommandContext[Any],
        config: Annotated[str, Short("c")],
        out: Annotated[str, Short("o")] = "out",
        seeds: Annotated[list[int] | None, Short("s")] = None,
        workers: Annotated[int, Short("w")] = 1,
        smooth: int = 0,
    ) -> list[float]:
        base = load_config(config)
        seed_list = _require_seeds(
            list(range(1, DEFAULT_RUN_SEEDS + 1)) if seeds is None else seeds
        )
        configs = seeded_configs(base, seed_list)
        out_dir = UPath(out)
        for seed in seed_list:
            for name in TRACE_FILES:
                ctx.record_artifact(out_dir / f"seed-{seed}" / name)
        jobs = [(c, str(out_dir), smooth) for c in configs]
        summaries = await map_jobs(run_seed, jobs, workers)

        spread = terminal_spread(summaries)
        checks = [
            contraction_result(base),
            CheckResult("terminal_spread", {"seeds": len(seed_list)}, True, spread),
        ]
        ctx.record_artifact(write_manifest(base, summaries, out_dir, checks))
        ctx.record_artifact(write_check_report(checks, out_dir / "checks.csv"))
        for s in summaries:
            msg = f"seed {s.seed}: regret {s.regret_mean:.3f}, reward {s.cumulative_reward:.3f}"
            await ctx.print(msg)
        await ctx.print(f"terminal state spread across seeds: {spread:.4f}")
        return [s.regret_mean for s in summaries]


class TableCommand(ExperimentCommand):
    """Reproduce the empirical regret table for one reward family.

    Runs every population size for `runs` seeds with the reference parameters
    (M=4) and writes table.csv plus the per-seed table_runs.csv.

    Example: table --reward linear --contraction false --ns 50,100 --runs 6
    """

    name = "table"

    async def execute_command(
        self,
        ctx: CommandContext[Any],
        reward: Literal["general", "linear"] = "general",
        contraction: bool = True,
        ns: list[int] | None = None,
        runs: int = 6,
        out: Annotated[str, Short("o")] = "out",
        seeds: Annotated[list[int] | None, Short("s")] = None,
        workers: Annotated[int, Short("w")] = 1,
        horizon: int = TABLE_HORIZON,
        config: Annotated[str | None, Short("c")] = None,
    ) -> list[tuple[Any, ...]]:
        if runs < 1:
            msg = f"runs must be at least 1, got {runs}"
            raise CommandError(msg)
        seed_list = _require_seeds(list(range(1, runs + 1)) if seeds is None else seeds)
        sizes = list(DEFAULT_TABLE_NS) if ns is None else ns
        base = load_config(config) if config else None
        out_dir = UPath(out)
        table_path = ctx.record_artifact(out_dir / "table.csv")
        runs_path = ctx.record_artifact(out_dir / "table_runs.csv")

        jobs = [
            (table_config(reward, contraction, n, seed, horizon, base),)
            for n in sizes
            for seed in seed_list
        ]
        results = await map_jobs(table_run, jobs, workers)
        rows = table_rows(results)
        write_csv(table_path, TABLE_HEADER, rows)
        write_csv(
            runs_path,
            ("reward", "N", "seed", "regret_mean", "regret_max", "rewards"),
            (
                (
                    r.reward,
                    r.num_agents,
                    r.seed,
                    repr(r.regret_mean),
                    repr(r.regret_max),
                    repr(r.cumulative_reward),
                )
                for r in results
            ),
        )
        for kind, n, regret, _, rewards, count, _ in rows:
            msg = f"{kind} N={n}: regret {float(regret):.3f}, rewards {float(rewards):.3f}"
            await ctx.print(f"{msg} ({count} runs)")
        return rows


class MfeCommand(ExperimentCommand):
    """Solve for the mean field equilibrium from several random starts.

    Reports each start's residual and the distinct fixed points, clustered at
    1e-4 resolution, in mfe.csv, mfe_states.csv and checks.csv.

    Example: mfe --config game.json --starts 10
    """

    name = "mfe"

    async def execute_command(
        self,
        ctx: CommandContext[Any],
        config: Annotated[str, Short("c")],
        starts: int = 10,
        out: Annotated[str, Short("o")] = "out",
        damping: float = 0.5,
        tol: float = 1e-10,
        max_iter: int = 100_000,
    ) -> int:
        if starts < 1:
            msg = f"starts must be at least 1, got {starts}"
            raise CommandError(msg)
        cfg = load_config(config)
        solutions = mfe_from_starts(cfg, starts, tol, max_iter, damping)
        paths, clusters = write_mfe_report(cfg, solutions, out)
        for path in paths:
            ctx.record_artifact(path)
        failed = sum(not s.converged for s in solutions)
        if failed:
            await ctx.print(f"{failed} of {starts} starts did not converge")
        await ctx.print(f"{clusters} distinct fixed point(s) from {starts} starts")
        return clusters


class DiagnoseCommand(ExperimentCommand):
    """Compare one simulation with the mean-field ODE and run the theorem checks.

    Writes distance, Lyapunov, pseudotrajectory, state change, variance and ODE
    state series plus checks.csv.

    Example: diagnose --config game.json --seed 3 --t_end 20
    """

    name = "diagnose"

    async def execute_command(
        self,
        ctx: CommandContext[Any],
        config: Annotated[str, Short("c")],
        seed: int | None = None,
        out: Annotated[str, Short("o")] = "out",
        t_end: float = 50.0,
        dt: float = 0.01,
        agent: int = 0,
        arm: int = 0,
        samples: int = 200,
    ) -> list[CheckResult]:
        cfg = load_config(config)
        if seed is not None:
            cfg = cfg.replace(seed=seed)
        out_dir = UPath(out)
        for name in DIAGNOSE_FILES:
            ctx.record_artifact(out_dir / name)
        _, checks = diagnose(
            cfg, out_dir, t_end=t_end, dt=dt, agent=agent, arm=arm, samples=samples
        )
        for check in checks:
            status = "ok" if check.passed else "FAILED"
            await ctx.print(f"{check.check:<28} {status:<7} margin {check.margin:.4g}")
        return checks


class HelpCommand(ExperimentCommand):
    """Display help information about commands.

    Usage:
      help                List all available commands
      help <command>      Show detailed help for a command
    """

    name = "help"
    category = "system"

    async def execute_command(self, ctx: CommandContext[Any], command: str | None = None) -> None:
        store = ctx.command_store
        if command:
            if cmd := store.get_command(command):
                await ctx.print(cmd.format_help())
            else:
                await ctx.print(f"Unknown command: {command}")
            return
        lines = ["Available commands:"]
        for cat, commands in store.get_commands_by_category().items():
            lines.append(f"\n{cat.title()}:")
            lines.extend(f"  {cmd.name:<10} {cmd.description}" for cmd in commands)
        await ctx.print("\n".join(lines))


def get_builtin_commands() -> list[BaseCommand]:
    return [RunCommand(), TableCommand(), MfeCommand(), DiagnoseCommand(), HelpCommand()]
