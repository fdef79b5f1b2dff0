"""Mixed-strategy route recommendations for users sharing congested roads with other drivers."""

from .baselines import CostReport, evaluate, informed, misinformed, selfish, uniform
from .behavior import DriverGroup, DriverProfile, Profile, UserGroup, mnl_strategy, project_simplex
from .cost import CostModel, TrafficConditions, conditions, convexity_diagnostics, expected_cost, gradient, hessian
from .errors import EquirouteError, NumericalError, ScenarioParseError, ValidationError
from .io import bundled, dump_scenario, load_scenario, parse_scenario, write_comparison, write_run
from .network import Edge, Network, Path
from .scenario import Event, Scenario, apply_event
from .simulation import ComparisonTable, RunResult, compare, run
from .solver import (GapReport, SolverConfig, StepSchedule, Trajectory, best_response, deviation_gap,
                     equilibrium, solve, stabilization_index)

__version__ = "0.1.0"

__all__ = [
    "ComparisonTable", "CostModel", "CostReport", "DriverGroup", "DriverProfile", "Edge", "EquirouteError",
    "Event", "GapReport", "Network", "NumericalError", "Path", "Profile", "RunResult", "Scenario",
    "ScenarioParseError", "SolverConfig", "StepSchedule", "TrafficConditions", "Trajectory", "UserGroup",
    "ValidationError", "apply_event", "best_response", "bundled", "compare", "conditions",
    "convexity_diagnostics", "deviation_gap", "dump_scenario", "equilibrium", "evaluate", "expected_cost",
    "gradient", "hessian", "informed", "load_scenario", "misinformed", "mnl_strategy", "parse_scenario",
    "project_simplex", "run", "selfish", "solve", "stabilization_index", "uniform", "write_comparison",
    "write_run",
]
