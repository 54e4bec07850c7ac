from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import _csv_tools
from .config import COMMANDS, RunConfig, load_config, write_config
from .coupling import Coupling, get_coupling
from .dynamics import cluster_report, detect_clusters, iterate, population_summary
from .equilibrium import GameConfig, tilde_E
from .exceptions import (
    ConfigError,
    ConfigKeyError,
    DynamicsError,
    MeasureError,
    SolverError,
    StabilityError,
    UnknownCouplingError,
)
from .measures import (
    DistributionKind,
    DistributionTag,
    EmpiricalMeasure,
    initial_distribution,
    read_measure,
)
from .stability import classify
from .tools import random_fixed_point

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfgcluster",
        description="Equilibria and cluster formation of the iterated congregation game.",
    )
    parser.add_argument("--config", help="YAML, JSON or key = value run configuration")
    parser.add_argument("--command", choices=[*COMMANDS, "reproduce-4"], default=None)
    parser.add_argument("--distribution", help="uniform, semicircle, triangular, inverted_semicircle or all")
    parser.add_argument("--measure", dest="measure_path", help="position,weight CSV of the initial population")
    parser.add_argument("--n", type=int, help="number of grid points")
    parser.add_argument("--coupling", help="registered coupling name")
    parser.add_argument("--t", help="round horizon or 'auto'")
    parser.add_argument("--safety", type=float)
    parser.add_argument("--max-rounds", type=int)
    parser.add_argument("--coalesce-eps", type=float)
    parser.add_argument("--cluster-gap", type=float)
    parser.add_argument("--stall-tol", type=float)
    parser.add_argument("--picard-tol", type=float)
    parser.add_argument("--inner-tolerance", choices=["budget", "tight"])
    parser.add_argument("--workers", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trajectory-stride", type=int)
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--progress", dest="show_progress", action="store_true", default=None)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--quiet", action="store_true")
    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def _coupling(config: RunConfig) -> Coupling:
    try:
        return get_coupling(config.coupling)
    except UnknownCouplingError as e:
        raise ConfigKeyError("coupling", str(e)) from e


def _distribution(name: str, config: RunConfig) -> DistributionKind:
    try:
        return DistributionKind.from_name(name, config.support)
    except ValueError as e:
        choices = ", ".join(tag.value for tag in DistributionTag)
        raise ConfigKeyError("distribution", f"unknown distribution '{name}', expected one of {choices}") from e


def _initial_measure(config: RunConfig) -> EmpiricalMeasure:
    if config.measure_path:
        try:
            return read_measure(config.measure_path)
        except (OSError, KeyError, ValueError) as e:
            raise ConfigKeyError("measure_path", str(e)) from e
    return initial_distribution(_distribution(config.resolved_distribution(), config), config.n)


def _game_summary(cfg: GameConfig, c: Coupling) -> str:
    return "\n".join(
        [
            f"coupling: {c}",
            f"t = {cfg.t:.17g}",
            f"alpha = {cfg.alpha:.17g}",
            f"inner tolerance: {cfg.inner_tolerance}",
        ]
    )


def _run_solve(config: RunConfig, out: str) -> None:
    c = _coupling(config)
    cfg = config.to_game_config(c)
    m0 = _initial_measure(config)
    result = tilde_E(m0.positions, m0.weights, cfg, c)
    report = detect_clusters(result.positions, m0.weights, config.resolved_cluster_gap(c))

    _csv_tools.write_equilibrium(os.path.join(out, "equilibrium.csv"), m0.positions, result.positions, m0.weights)
    solve = "\n".join(
        [
            f"picard sweeps: {result.picard_iters}",
            f"certified error: {result.certified_error:.6e}",
            f"a-posteriori error: {result.a_posteriori_error:.6e}",
            f"residual: {result.residual:.6e}",
        ]
    )
    _csv_tools.write_summary(
        os.path.join(out, "summary.txt"),
        [("game", _game_summary(cfg, c)), ("equilibrium", solve), ("groups", _csv_tools.format_cluster_table(report))],
    )
    logger.info("Solved one round for %d agents in %d sweeps", len(m0), result.picard_iters)


def _run_iterate(config: RunConfig, m0: EmpiricalMeasure, out: str) -> None:
    c = _coupling(config)
    cfg = config.to_game_config(c)
    eps = config.resolved_coalesce_eps()
    trace = iterate(
        m0,
        cfg,
        c,
        config.max_rounds,
        eps,
        stall_tol=config.stall_tol,
        show_progress=config.show_progress,
    )
    report = cluster_report(trace, config.resolved_cluster_gap(c), eps)
    summary = population_summary(trace, report)

    os.makedirs(out, exist_ok=True)
    _csv_tools.write_cluster_table(os.path.join(out, "clusters.csv"), report)
    _csv_tools.write_trajectory(os.path.join(out, "trajectory.csv"), trace, config.trajectory_stride)
    rounds = f"rounds: {len(trace.rounds) - 1}\nstop reason: {trace.stop_reason.value}"
    _csv_tools.write_summary(
        os.path.join(out, "summary.txt"),
        [
            ("game", _game_summary(cfg, c)),
            ("iteration", rounds),
            ("clusters", _csv_tools.format_cluster_table(report)),
            ("population", _csv_tools.format_population_summary(summary)),
        ],
    )
    logger.info("Wrote %s to '%s'", report, out)


def _run_stability(config: RunConfig, out: str) -> None:
    c = _coupling(config)
    cfg = config.to_game_config(c)
    if config.measure_path:
        m = _initial_measure(config)
        x, w = m.positions, m.weights
    else:
        x, sizes = random_fixed_point(np.random.default_rng(config.seed), c)
        w = np.full(len(x), 1.0 / len(x))
        logger.info("Drew a fixed point with cluster sizes %s", sizes)

    report = classify(x, w, cfg, c)
    _csv_tools.write_eigenvalues(os.path.join(out, "eigenvalues.csv"), report)
    verdict = "\n".join(
        [
            f"verdict = {report.verdict.value}",
            f"restricted spectral radius = {report.restricted_spectral_radius:.17g}",
            f"spread out: {report.spread_out}",
            f"cluster sizes: {report.cluster_sizes}",
        ]
    )
    _csv_tools.write_summary(
        os.path.join(out, "summary.txt"), [("game", _game_summary(cfg, c)), ("stability", verdict)]
    )


def _run_reproduce(config: RunConfig, out: str) -> None:
    name = config.resolved_distribution()
    if name.strip().lower() == "all":
        kinds = [DistributionKind(tag, config.support) for tag in DistributionTag]
    else:
        kinds = [_distribution(name, config)]
    for kind in kinds:
        logger.info("Reproducing the %s population", kind.tag.value)
        m0 = initial_distribution(kind, config.n)
        _run_iterate(config, m0, os.path.join(out, kind.tag.value))


def run(config: RunConfig) -> int:
    """Executes one command and writes its files into `config.output_dir`.

    Returns
    -------
    `int`:
        0 on success, 2 for configuration errors, 3 when a solver or the
        spectral analysis fails
    """
    out = config.output_dir
    try:
        os.makedirs(out, exist_ok=True)
        write_config(os.path.join(out, "run.yaml"), config)
        if config.command == "solve":
            _run_solve(config, out)
        elif config.command == "iterate":
            _run_iterate(config, _initial_measure(config), out)
        elif config.command == "stability":
            _run_stability(config, out)
        else:
            _run_reproduce(config, out)
    except (ConfigError, MeasureError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except (SolverError, StabilityError, DynamicsError) as e:
        logger.error("%s", e)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)

    overrides = {
        k: v for k, v in vars(args).items() if k not in ("config", "verbose", "quiet")
    }
    try:
        base = load_config(args.config) if args.config else RunConfig()
        config = base.with_overrides(overrides)
    except (ConfigError, OSError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
