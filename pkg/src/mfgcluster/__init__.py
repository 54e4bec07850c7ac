from .coupling import Coupling, available_couplings, bump_coupling, get_coupling, register_coupling
from .dynamics import ClusterReport, IterationTrace, StopReason, cluster_report, iterate
from .equilibrium import EquilibriumResult, GameConfig, best_response, tilde_E
from .measures import (
    DistributionKind,
    EmpiricalMeasure,
    initial_distribution,
    new_empirical,
    uniform_measure,
    w1_distance,
)
from .stability import StabilityReport, Verdict, classify

__version__ = "0.1.0"
