from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from ._kernels import window_sums
from .coupling import Coupling
from .equilibrium import GameConfig, realized_cost, tilde_E, worker_pool
from .exceptions import BlocksNotSeparatedError, NonConvergenceError
from .measures import EmpiricalMeasure, mean, new_empirical, spread_to_mean

logger = logging.getLogger(__name__)

ISOLATION_SHARE = 1e-3


class StopReason(str, enum.Enum):
    COALESCED = "Coalesced"
    MAX_ROUNDS = "MaxRounds"
    STALLED = "Stalled"


@dataclass
class IterationTrace:
    """Positions of every agent after every round of the iterated game.

    Parameters
    ----------
    rounds :class:`list[np.ndarray]`:
        Round 0 is the initial configuration

    weights :class:`np.ndarray`:
        The mass of each agent, constant across rounds

    per_agent_movement :class:`np.ndarray`:
        Accumulated |move| of each agent

    per_agent_cost :class:`np.ndarray`:
        Accumulated realized round cost of each agent

    stop_reason :class:`StopReason`:
        Why the iteration ended
    """

    rounds: list[np.ndarray]
    weights: np.ndarray
    per_agent_movement: np.ndarray
    per_agent_cost: np.ndarray
    stop_reason: StopReason = StopReason.MAX_ROUNDS

    def __str__(self) -> str:
        return f"IterationTrace({len(self.rounds) - 1} rounds, {len(self.weights)} agents, {self.stop_reason.value})"

    @property
    def initial(self) -> np.ndarray:
        return self.rounds[0]

    @property
    def final(self) -> np.ndarray:
        return self.rounds[-1]

    def measure(self, round_index: int = -1) -> EmpiricalMeasure:
        return new_empirical(self.rounds[round_index], self.weights)


def is_fixed_point(
    x: Sequence[float],
    c: Coupling,
    tol: float,
    weights: Optional[Sequence[float]] = None,
) -> bool:
    """Checks the clustering characterisation of fixed points: every pair of
    positions either coincides (within `tol`) or is at least r - `tol` apart.

    The gradient residual max_j |sum_k w_k phi'(x_j - x_k)| is computed
    alongside and a disagreement between both criteria is logged.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.full(len(x), 1.0 / len(x)) if weights is None else np.asarray(weights, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    r = c.support_radius
    if r <= 2 * tol:
        return True
    lo = np.searchsorted(x, x + tol, side="right")
    hi = np.searchsorted(x, x + r - tol, side="left")
    pairs_ok = bool(np.all(hi <= lo))

    grad = gradient_residual(x, w, c)
    if pairs_ok and grad > c.lipschitz_L1 * tol:
        logger.warning("Pair criterion holds but gradient residual is %.3e", grad)
    return pairs_ok


def gradient_residual(x: np.ndarray, weights: np.ndarray, c: Coupling) -> float:
    return float(np.max(np.abs(window_sums(c.phi_prime, x, x, weights, c.support_radius))))


def iterate(
    m0: EmpiricalMeasure,
    cfg: GameConfig,
    c: Coupling,
    max_rounds: int,
    coalesce_eps: float,
    *,
    stall_tol: Optional[float] = None,
    show_progress: bool = False,
) -> IterationTrace:
    """Plays the game round after round, x_{k+1} = tilde_E(x_k).

    Stops as `Coalesced` once the configuration is a fixed point within
    10 * picard_tol, as `Stalled` once no agent moves more than `stall_tol`
    in a round, and as `MaxRounds` otherwise.

    Parameters
    ----------
    m0 :class:`EmpiricalMeasure`:
        The initial population

    max_rounds :class:`int`:
        Upper bound on the number of rounds

    coalesce_eps :class:`float`:
        Coalescence radius, sets the default `stall_tol` = 1e-3 * eps * t

    show_progress :class:`bool`:
        Whether to display a progress bar over the rounds

    Raises
    ------
    `NonConvergenceError`
        When a round's equilibrium solve fails, with the round index attached
    """
    stall_tol = 1e-3 * coalesce_eps * cfg.t if stall_tol is None else stall_tol
    fixed_tol = 10 * cfg.picard_tol
    x = np.array(m0.positions)
    w = np.array(m0.weights)
    trace = IterationTrace([x.copy()], w, np.zeros(len(x)), np.zeros(len(x)))
    displacement = np.zeros(len(x))

    rounds = tqdm(range(max_rounds), disable=not show_progress, desc="rounds")
    with worker_pool(cfg) as pool:
        for k in rounds:
            # the last round's displacement is the guess for this one
            try:
                result = tilde_E(x, w, cfg, c, start=x + displacement, pool=pool)
            except NonConvergenceError as e:
                raise NonConvergenceError(e.stage, e.iterations, index=e.index, round=k + 1) from e

            y = result.positions
            displacement = y - x
            move = np.abs(displacement)
            trace.per_agent_movement += move
            trace.per_agent_cost += realized_cost(x, y, w, cfg, c)
            trace.rounds.append(y.copy())
            x = y

            largest = float(move.max())
            logger.debug("Round %d: max move %.3e, %d sweeps", k + 1, largest, result.picard_iters)
            if is_fixed_point(x, c, fixed_tol, w):
                trace.stop_reason = StopReason.COALESCED
                break
            if largest < stall_tol:
                trace.stop_reason = StopReason.STALLED
                break

    logger.info("Iteration stopped after %d rounds: %s", len(trace.rounds) - 1, trace.stop_reason.value)
    return trace


@dataclass(frozen=True)
class Cluster:
    """One group of the final configuration."""

    center: float
    member_indices: np.ndarray
    population_share: float
    coalesce_round: Optional[int] = None
    initial_range: tuple[float, float] = (float("nan"), float("nan"))
    avg_initial_position: float = float("nan")
    avg_total_movement: float = float("nan")
    avg_total_cost: float = float("nan")

    def __len__(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True)
class ClusterReport:
    clusters: list[Cluster]
    isolated_agents: list[int]
    isolated_share: float = 0.0

    def __str__(self) -> str:
        return f"ClusterReport({len(self.clusters)} clusters, {len(self.isolated_agents)} isolated agents)"


def cluster_blocks(x: Sequence[float], gap: float) -> list[np.ndarray]:
    """Index blocks of sorted positions, split wherever neighbours are more
    than `gap` apart."""
    x = np.asarray(x, dtype=np.float64)
    breaks = np.flatnonzero(np.diff(x) > gap) + 1
    return np.split(np.arange(len(x)), breaks)


def detect_clusters(
    x: Sequence[float],
    weights: Sequence[float],
    gap: float,
    isolation_share: float = ISOLATION_SHARE,
) -> ClusterReport:
    """Single-linkage grouping of sorted positions: a new group starts
    wherever two neighbours are more than `gap` apart. Groups holding less
    than `isolation_share` of the population are reported as isolated agents.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    clusters: list[Cluster] = []
    isolated: list[int] = []
    isolated_share = 0.0
    for members in cluster_blocks(x, gap):
        share = float(w[members].sum())
        if share < isolation_share:
            isolated.extend(int(i) for i in members)
            isolated_share += share
            continue
        center = float(np.dot(x[members], w[members]) / share)
        clusters.append(Cluster(center, members, share))
    return ClusterReport(clusters, isolated, isolated_share)


def coalesce_round(trace: IterationTrace, cluster: Cluster, eps: float) -> Optional[int]:
    """The first round from which every member of `cluster` stays within
    `eps` of its final center; None for single agents or if never reached."""
    if len(cluster) < 2:
        return None
    members = cluster.member_indices
    history = np.array([r[members] for r in trace.rounds])
    outside = np.max(np.abs(history - cluster.center), axis=1) > eps
    if outside[-1]:
        return None
    late = np.flatnonzero(outside)
    return 0 if late.size == 0 else int(late[-1]) + 1


def cluster_report(
    trace: IterationTrace,
    gap: float,
    eps: float,
    isolation_share: float = ISOLATION_SHARE,
) -> ClusterReport:
    """Detects the groups of the final round and fills in the per-group
    statistics of the reference result tables."""
    report = detect_clusters(trace.final, trace.weights, gap, isolation_share)
    w = trace.weights
    enriched = []
    for cl in report.clusters:
        members = cl.member_indices
        share = cl.population_share
        initial = trace.initial[members]
        enriched.append(
            replace(
                cl,
                coalesce_round=coalesce_round(trace, cl, eps),
                initial_range=(float(initial.min()), float(initial.max())),
                avg_initial_position=float(np.dot(initial, w[members]) / share),
                avg_total_movement=float(np.dot(trace.per_agent_movement[members], w[members]) / share),
                avg_total_cost=float(np.dot(trace.per_agent_cost[members], w[members]) / share),
            )
        )
    return replace(report, clusters=enriched)


@dataclass(frozen=True)
class GameBlock:
    """A contiguous block of agents playing an independent sub-game."""

    start: int
    stop: int
    horizon: float
    mass: float

    @property
    def indices(self) -> slice:
        return slice(self.start, self.stop)


def split_game(
    x: Sequence[float],
    weights: Sequence[float],
    cfg: GameConfig,
    c: Coupling,
    boundaries: Optional[Sequence[int]] = None,
) -> list[GameBlock]:
    """Splits sorted positions into blocks more than r apart, each with the
    horizon t * (block mass) under which it plays the same game alone.

    Parameters
    ----------
    boundaries :class:`Sequence[int]` [Optional]:
        Explicit block starts (excluding 0); by default every gap > r splits

    Raises
    ------
    `BlocksNotSeparatedError`
        When an explicit boundary separates atoms at most r apart
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    r = c.support_radius
    if boundaries is None:
        boundaries = [int(b) for b in np.flatnonzero(np.diff(x) > r) + 1]
    else:
        for b in boundaries:
            gap = float(x[b] - x[b - 1])
            if not gap > r:
                raise BlocksNotSeparatedError(int(b), gap, r)

    edges = [0, *boundaries, len(x)]
    blocks = []
    for start, stop in zip(edges[:-1], edges[1:]):
        mass = float(w[start:stop].sum())
        blocks.append(GameBlock(start, stop, cfg.t * mass, mass))
    return blocks


def solve_split(
    x: Sequence[float], weights: Sequence[float], cfg: GameConfig, c: Coupling
) -> np.ndarray:
    """Solves each separated block as its own game with rescaled horizon and
    renormalized weights, and concatenates the block equilibria."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    parts = []
    for block in split_game(x, w, cfg, c):
        sub = cfg.with_horizon(block.horizon)
        parts.append(tilde_E(x[block.indices], w[block.indices] / block.mass, sub, c).positions)
    return np.concatenate(parts)


@dataclass(frozen=True)
class PopulationSummary:
    """Whole-population statistics of an iterated run."""

    avg_total_movement: float
    share_moved_away_from_mean: float
    initial_spread: float
    final_spread: float
    clusters_closer_to_mean: list[bool]

    @property
    def narrowed(self) -> bool:
        return self.final_spread < self.initial_spread


def population_summary(trace: IterationTrace, report: ClusterReport) -> PopulationSummary:
    w = trace.weights
    center = mean(trace.measure(0))
    away = np.abs(trace.final - center) > np.abs(trace.initial - center)
    return PopulationSummary(
        avg_total_movement=float(np.dot(trace.per_agent_movement, w)),
        share_moved_away_from_mean=float(w[away].sum()),
        initial_spread=spread_to_mean(trace.measure(0)),
        final_spread=spread_to_mean(trace.measure(-1)),
        clusters_closer_to_mean=[
            abs(cl.center - center) < abs(cl.avg_initial_position - center)
            for cl in report.clusters
        ],
    )

