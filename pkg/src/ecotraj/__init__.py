"""Evolutionary density clustering for streams of moving-object locations.

Locations are smoothed toward recent co-moving neighbours before each
step's DBSCAN, so one-step glitches do not break cluster identity.
"""

from .dbscan import Clustering, ClusterEvent, EventKind, adapt_epsilon, cluster, initial_epsilon, map_clusters
from .engine import EngineState, StepResult, run, step
from .errors import EcoError
from .geo import GpsRecord, Params, PlanarPoint, PlanarRecord, Snapshot, build_snapshot, discretize_timestamp
from .grid import GridIndex
from .groups import GroupSet, MinimalGroup, generate
from .metrics import StepMetrics, modularity, nmi, nmi_labels
from .smoothing import Adjustment, smooth_group, smooth_snapshot, solve_adjustment
from .synthetic import GeneratorSpec, two_blob_scenario, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "Adjustment", "ClusterEvent", "Clustering", "EcoError", "EngineState", "EventKind", "GeneratorSpec",
    "GpsRecord", "GridIndex", "GroupSet", "MinimalGroup", "Params", "PlanarPoint", "PlanarRecord", "Snapshot",
    "StepMetrics", "StepResult", "adapt_epsilon", "build_snapshot", "cluster", "discretize_timestamp",
    "two_blob_scenario", "generate", "generate_synthetic", "initial_epsilon", "map_clusters", "modularity",
    "nmi", "nmi_labels", "run", "smooth_group", "smooth_snapshot", "solve_adjustment", "step",
]
