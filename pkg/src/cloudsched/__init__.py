"""Slotted-time cloud-cluster scheduling simulator and exact LP benchmarks."""

from .cluster import ClusterModel, feasible_from_maximal, feasible_from_resources
from .costs import CostParams
from .engine import RunConfig, RunMetrics, run, sweep
from .optimum import capacity_boundary, solve_static_cost, theorem_bounds

__version__ = "0.1.0"

__all__ = [
    "ClusterModel", "CostParams", "RunConfig", "RunMetrics",
    "capacity_boundary", "feasible_from_maximal", "feasible_from_resources",
    "run", "solve_static_cost", "sweep", "theorem_bounds",
]
