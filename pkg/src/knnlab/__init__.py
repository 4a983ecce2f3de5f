"""Monte Carlo laboratory for k-nearest-neighbour random geometric graphs."""

from ._backend import BACKEND
from .components import ComponentSummary, connected_components, find_close_small_pairs, is_connected
from .counting import (BadEventFlags, GridPoint, detect_bad_events,
                       global_counting_function, local_counting_function, nearest_grid_point)
from .geometry import PointSet, Region, sample_poisson_pointset
from .harness import ExperimentConfig, TrialRecord, aggregate, run_experiment
from .knn import KnnGraph, brute_force_knn_graph, build_knn_graph, longest_edge_length
from .local import (ConstantsBundle, build_covers, check_claim_inequalities,
                    compute_constants, detect_bad_set_C, empty_tile_certificate,
                    evaluate_local_events, scaled_constants)
from .stats import (ChenSteinReport, CountDistribution, estimate_chen_stein,
                    poisson_pmf, poisson_set_mass, process_marginal_comparison,
                    reconcile_mu_nu, total_variation)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BadEventFlags", "ChenSteinReport", "ComponentSummary",
    "ConstantsBundle", "CountDistribution", "ExperimentConfig", "GridPoint",
    "KnnGraph", "PointSet", "Region", "TrialRecord", "aggregate",
    "brute_force_knn_graph", "build_covers", "build_knn_graph",
    "check_claim_inequalities", "compute_constants", "connected_components",
    "detect_bad_events", "detect_bad_set_C", "empty_tile_certificate",
    "estimate_chen_stein", "evaluate_local_events", "find_close_small_pairs",
    "global_counting_function", "is_connected", "local_counting_function",
    "longest_edge_length", "nearest_grid_point", "poisson_pmf",
    "poisson_set_mass", "process_marginal_comparison", "reconcile_mu_nu",
    "run_experiment", "sample_poisson_pointset", "scaled_constants",
    "total_variation",
]
