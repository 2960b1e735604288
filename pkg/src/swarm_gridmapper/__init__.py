"""Deterministic multi-robot exploration simulator with distributed
occupancy-grid mapping over a range-limited mesh."""

__version__ = "0.1.0"

from .engine import AgentState, SimulationTrace, Simulator, run_scenario
from .exploration import frontier_field, preference_potential, select_waypoint
from .harness import (MetricsSeries, compute_metrics, fit_time_constant,
                      mean_rate, rate_of_change, run_preset, time_to_threshold,
                      world_capacity)
from .mapping import CellState, OccupancyGrid, SensorModel, Thresholds
from .network import (SensedLog, StateBroadcast, compute_connectivity,
                      deliver_broadcasts)
from .presets import get_preset
from .scenario import ScenarioScript, SimParams, load_scenario
from .world import Pose, Scan, WorldModel

__all__ = [
    "AgentState", "CellState", "MetricsSeries", "OccupancyGrid", "Pose",
    "Scan", "ScenarioScript", "SensedLog", "SensorModel", "SimParams",
    "SimulationTrace", "Simulator", "StateBroadcast", "Thresholds",
    "WorldModel", "compute_connectivity", "compute_metrics",
    "deliver_broadcasts", "fit_time_constant", "frontier_field", "get_preset",
    "load_scenario", "mean_rate", "preference_potential", "rate_of_change",
    "run_preset", "run_scenario", "select_waypoint", "time_to_threshold",
    "world_capacity",
]
