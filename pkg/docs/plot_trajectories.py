"""Plot the CSV output of the `run` and `diagnose` commands.

Needs the `plot` extra (matplotlib).

    python docs/plot_trajectories.py runs/contraction/seed-1 diag/
"""

from __future__ import annotations

import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt
import numpy as np
from upath import UPath


def read_rows(path: UPath) -> list[dict[str, str]]:
    with path.open(newline="") as fp:
        return list(csv.DictReader(fp))


def plot_population(seed_dir: UPath) -> None:
    rows = read_rows(seed_dir / "population.csv")
    key = next((k for k in rows[0] if k.startswith("fraction_ma")), "fraction")
    smoothed = key != "fraction"
    series: dict[int, list[float]] = defaultdict(list)
    for row in rows:
        series[int(row["arm"])].append(float(row[key]))
    plt.figure(figsize=(10, 6))
    for arm, values in sorted(series.items()):
        plt.plot(values, label=f"arm {arm}")
    plt.xlabel("slot n")
    plt.ylabel("population fraction" + (" (moving average)" if smoothed else ""))
    plt.legend()
    plt.title(f"Population profile, {seed_dir.name}")
    plt.show()


def plot_diagnostics(diag_dir: UPath) -> None:
    fig, (ax_dist, ax_lyap, ax_change) = plt.subplots(1, 3, figsize=(15, 4))
    distance = read_rows(diag_dir / "distance.csv")
    ax_dist.semilogy([int(r["n"]) for r in distance], [float(r["distance"]) for r in distance])
    ax_dist.set_xlabel("slot n")
    ax_dist.set_title("distance to equilibrium")
    lyapunov = read_rows(diag_dir / "lyapunov.csv")
    ax_lyap.semilogy([float(r["t"]) for r in lyapunov], [float(r["value"]) for r in lyapunov])
    ax_lyap.set_xlabel("t")
    ax_lyap.set_title("Lyapunov function along the ODE")
    change = read_rows(diag_dir / "state_change.csv")
    k = np.asarray([int(r["k"]) for r in change])
    ax_change.plot(k, [float(r["lhs"]) for r in change], label="lhs")
    ax_change.plot(k, [float(r["rhs"]) for r in change], label="rhs")
    ax_change.set_xlabel("K")
    ax_change.set_title("cumulative state change")
    ax_change.legend()
    fig.tight_layout()
    plt.show()


if __name__ == "__main__":
    plot_population(UPath(sys.argv[1]))
    if len(sys.argv) > 2:  # noqa: PLR2004
        plot_diagnostics(UPath(sys.argv[2]))
