"""Time-stepped scenario engine, method runs and the six-way comparison."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import CostReport, evaluate, informed, misinformed, selfish, uniform, with_shortest_paths
from .behavior import Profile
from .cost import TrafficConditions, all_expected_costs, conditions
from .scenario import Event, Scenario, apply_event
from .solver import SolverConfig, Trajectory, solve, stabilization_index

METHODS = ("selfish", "uniform", "misinformed", "wu", "pu", "ru")
METHOD_TITLES = {"selfish": "Selfish", "uniform": "Uniform", "misinformed": "w/o MNL",
                 "wu": "WU", "pu": "PU", "ru": "RU"}
STATIC_METHODS = ("selfish", "uniform", "misinformed", "wu")

__all__ = ["METHODS", "METHOD_TITLES", "STATIC_METHODS", "ComparisonTable", "Event", "Phase", "RunResult",
           "Scenario", "TrafficConditions", "apply_event", "compare", "conditions", "phases", "plan", "run",
           "thread_cap"]


@dataclass(frozen=True)
class Phase:
    label: str
    step: int


def phases(scenario: Scenario) -> list[Phase]:
    """Reporting points: the last step before each event, then the final step."""
    out = []
    for i, s in enumerate(scenario.event_steps()):
        if 0 < s <= scenario.horizon:
            out.append(Phase(f"pre_event_{i + 1}", s - 1))
    out.append(Phase("final", scenario.horizon))
    return out


@dataclass
class RunResult:
    method: str
    scenario: Scenario
    trajectory: Trajectory
    phase_reports: dict[str, CostReport]
    phase_steps: dict[str, int]
    stabilization: dict[str, int | None] = field(default_factory=dict)


def _static_trajectory(scenario: Scenario, profile: Profile) -> Trajectory:
    """A plan that never changes, recorded at every step of the horizon."""
    traj = Trajectory()
    drivers = scenario.driver_profile(scenario.network)
    no_flags = np.zeros(profile.n_users, dtype=bool)
    model = scenario.model
    network = scenario.network
    steps = set(scenario.event_steps())
    for n in range(scenario.horizon + 1):
        if n in steps:
            network = scenario.network_at(n)
            model = model.with_network(network)
        cond = conditions(model, profile, drivers, step=n)
        traj.profiles.append(profile)
        traj.conditions.append(cond)
        traj.costs.append(all_expected_costs(model, profile, cond.m))
        traj.flags.append(no_flags)
        traj.driver_profiles.append(drivers)
    return traj


def plan(scenario: Scenario, method: str, config: SolverConfig | None = None) -> tuple[Scenario, Profile]:
    """Static plan made once at step 0; may extend path sets for graph-wide selfish routing."""
    config = config or scenario.solver or SolverConfig()
    if method == "selfish":
        if scenario.selfish_graph_wide:
            scenario = with_shortest_paths(scenario)
        return scenario, selfish(scenario)
    if method == "uniform":
        return scenario, uniform(scenario)
    if method == "misinformed":
        return scenario, misinformed(scenario, config)
    if method == "wu":
        return scenario, informed(scenario, config)
    raise ValueError(f"{method!r} is not a static method")


def run(scenario: Scenario, method: str, config: SolverConfig | None = None) -> RunResult:
    """Run one method over the scenario horizon and report at each phase boundary.

    Static methods plan once and are evaluated against the network in force at
    each phase step. ``pu``/``ru`` iterate the parallel/random scheme, applying
    events as their steps arrive.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    config = config or scenario.solver or SolverConfig()
    if method in STATIC_METHODS:
        scenario, profile = plan(scenario, method, config)
        traj = _static_trajectory(scenario, profile)
    else:
        scheme = "parallel" if method == "pu" else "random"
        traj = solve(scenario, replace(config, scheme=scheme))
    reports, steps, stab = {}, {}, {}
    bounds = [0] + [s for s in scenario.event_steps() if 0 < s <= scenario.horizon] + [scenario.horizon + 1]
    for ph in phases(scenario):
        reports[ph.label] = evaluate(traj.profiles[ph.step], scenario, scenario.network_at(ph.step),
                                     traj.driver_profiles[ph.step])
        steps[ph.label] = ph.step
    residuals = traj.residuals()
    for ph, lo, hi in zip(phases(scenario), bounds, bounds[1:]):
        idx = stabilization_index(residuals[lo:hi - 1], config.tol, config.window)
        stab[ph.label] = None if idx is None else lo + idx
    return RunResult(method, scenario, traj, reports, steps, stab)


@dataclass
class ComparisonTable:
    methods: tuple[str, ...]
    phases: tuple[Phase, ...]
    ods: tuple[str, ...]
    counts: dict[str, int]
    cells: dict[tuple[str, str], CostReport]  # (phase label, method) -> report
    runs: dict[str, RunResult]

    def cost(self, phase: str, method: str, od: str | None = None) -> float:
        r = self.cells[(phase, method)]
        return r.total if od is None else r.per_od[od]

    def paradoxes(self, reference: str = "pu", eps: float = 1e-3) -> list[tuple[str, str, str]]:
        """Rows where a method beats ``reference`` on one OD yet loses on the total.

        Differences up to ``eps`` minutes count as ties, so residual solver
        noise never raises a flag. Each flag is ``(phase, method, od)``; ``method == "wu"`` is the
        route-update paradox, ``"misinformed"`` the misinformation paradox.
        """
        if reference not in self.methods:
            return []
        flags = []
        for ph in self.phases:
            ref = self.cells[(ph.label, reference)]
            for m in self.methods:
                if m == reference:
                    continue
                r = self.cells[(ph.label, m)]
                if r.total > ref.total + eps:
                    flags.extend((ph.label, m, od) for od in self.ods if r.per_od[od] < ref.per_od[od] - eps)
        return flags

    def route_update_paradox(self, phase: str = "final") -> list[str]:
        return [od for ph, m, od in self.paradoxes() if ph == phase and m == "wu"]


def thread_cap(default: int | None = None) -> int:
    raw = os.environ.get("EQUIROUTE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return default or min(len(METHODS), os.cpu_count() or 1)


def compare(scenario: Scenario, config: SolverConfig | None = None,
            methods: tuple[str, ...] = METHODS, threads: int | None = None) -> ComparisonTable:
    """Run every requested method with the same seed and tabulate per-OD and total costs."""
    config = config or scenario.solver or SolverConfig()
    workers = threads or thread_cap()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda m: run(scenario, m, config), methods))
    runs = dict(zip(methods, results))
    cells = {(ph.label, m): runs[m].phase_reports[ph.label] for ph in phases(scenario) for m in methods}
    first = results[0].phase_reports["final"]
    return ComparisonTable(tuple(methods), tuple(phases(scenario)), tuple(scenario.od_labels()),
                           dict(first.counts), cells, runs)
