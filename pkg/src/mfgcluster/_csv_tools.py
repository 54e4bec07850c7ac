from typing import Optional

import numpy as np
import pandas as pd

from .dynamics import ClusterReport, IterationTrace, PopulationSummary
from .stability import StabilityReport

CLUSTER_COLUMNS = [
    "Group",
    "Coalescing Point",
    "Iterations",
    "Population %",
    "Initial Range",
    "Avg Initial",
    "Avg Movement",
    "Avg Cost",
]


FLOAT_FORMAT = "%.17g"


def _write(filepath: str, frame: pd.DataFrame) -> None:
    frame.to_csv(filepath, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_trajectory(filepath: str, trace: IterationTrace, stride: int = 1) -> None:
    """Writes `round,agent,position` rows; the last round is always written."""
    last = len(trace.rounds) - 1
    kept = [k for k in range(last + 1) if k % stride == 0 or k == last]
    n = len(trace.weights)
    frame = pd.DataFrame(
        {
            "round": np.repeat(kept, n),
            "agent": np.tile(np.arange(n), len(kept)),
            "position": np.concatenate([trace.rounds[k] for k in kept]),
        }
    )
    _write(filepath, frame)


def write_cluster_table(filepath: str, report: ClusterReport) -> None:
    rows = []
    for i, cl in enumerate(report.clusters, start=1):
        lo, hi = cl.initial_range
        rows.append(
            [
                i,
                cl.center,
                cl.coalesce_round,
                100.0 * cl.population_share,
                f"{lo:.17g} to {hi:.17g}",
                cl.avg_initial_position,
                cl.avg_total_movement,
                cl.avg_total_cost,
            ]
        )
    frame = pd.DataFrame(rows, columns=CLUSTER_COLUMNS)
    frame["Iterations"] = frame["Iterations"].astype("Int64")
    _write(filepath, frame)


def write_eigenvalues(filepath: str, report: StabilityReport) -> None:
    """One row per eigenvalue of the linearized equilibrium map; `restricted`
    marks the ones left after removing the cluster translations."""
    full, restricted = report.dE_eigenvalues, report.restricted_eigenvalues
    frame = pd.DataFrame(
        {
            "index": np.concatenate((np.arange(len(full)), np.arange(len(restricted)))),
            "eigenvalue": np.concatenate((full, restricted)),
            "restricted": np.repeat([0, 1], [len(full), len(restricted)]),
        }
    )
    _write(filepath, frame)


def write_equilibrium(
    filepath: str, initial: np.ndarray, final: np.ndarray, weights: np.ndarray
) -> None:
    frame = pd.DataFrame({"initial": initial, "final": final, "weight": weights})
    frame.insert(0, "agent", np.arange(len(frame)))
    _write(filepath, frame)


def format_cluster_table(report: ClusterReport) -> str:
    """The cluster table with 4 decimals, for reading."""
    header = (
        f"{'Group':>5}  {'Point':>10}  {'Iters':>6}  {'Pop %':>8}  "
        f"{'Initial Range':>21}  {'Avg Init':>10}  {'Avg Move':>10}  {'Avg Cost':>12}"
    )
    lines = [header]
    for i, cl in enumerate(report.clusters, start=1):
        lo, hi = cl.initial_range
        rounds = "-" if cl.coalesce_round is None else str(cl.coalesce_round)
        lines.append(
            f"{i:>5}  {cl.center:>10.4f}  {rounds:>6}  {100 * cl.population_share:>8.4f}  "
            f"{f'{lo:.4f} to {hi:.4f}':>21}  {cl.avg_initial_position:>10.4f}  "
            f"{cl.avg_total_movement:>10.4f}  {cl.avg_total_cost:>12.4f}"
        )
    if report.isolated_agents:
        lines.append(
            f"isolated agents: {len(report.isolated_agents)}"
            f" ({100 * report.isolated_share:.4f}% of the population)"
        )
    return "\n".join(lines)


def format_population_summary(summary: PopulationSummary) -> str:
    closer = sum(summary.clusters_closer_to_mean)
    return "\n".join(
        [
            f"average total movement: {summary.avg_total_movement:.4f}",
            f"moved away from the mean: {100 * summary.share_moved_away_from_mean:.4f}%",
            f"clusters closer to the mean than their members started: {closer}"
            f" of {len(summary.clusters_closer_to_mean)}",
            f"spread to mean: {summary.initial_spread:.4f} -> {summary.final_spread:.4f}"
            f" ({'narrower' if summary.narrowed else 'not narrower'})",
        ]
    )


def write_summary(filepath: str, sections: list[tuple[str, Optional[str]]]) -> None:
    """Writes `summary.txt` from titled text blocks, skipping empty ones."""
    with open(filepath, "w") as f:
        blocks = [f"[{title}]\n{body}" for title, body in sections if body]
        f.write("\n\n".join(blocks) + "\n")
