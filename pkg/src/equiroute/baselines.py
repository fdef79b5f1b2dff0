"""Comparison recommendation policies and the common cost evaluator."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .behavior import DriverProfile, Profile
from .cost import driver_edge_flows, edge_costs, total_flows
from .network import Network, shortest_path
from .scenario import Scenario
from .solver import SolverConfig, equilibrium


@dataclass(frozen=True)
class CostReport:
    """Expected travel times in minutes.

    ``total`` sums the users' expected costs only; drivers are reported per OD
    but never enter the total.
    """

    per_od: dict[str, float]
    counts: dict[str, int]
    total: float
    per_user: np.ndarray
    driver_per_od: dict[str, float]

    def weighted_total(self) -> float:
        return sum(self.per_od[od] * self.counts[od] for od in self.per_od)


def evaluate(profile: Profile, scenario: Scenario, network: Network | None = None,
             driver_profile: DriverProfile | None = None) -> CostReport:
    """Expected cost of every user (and driver group) under combined flows.

    ``network`` defaults to the scenario's initial network and
    ``driver_profile`` to the drivers' initial MNL choices on that network.
    """
    network = network or scenario.network
    model = scenario.model.with_network(network)
    if driver_profile is None:
        driver_profile = scenario.driver_profile(scenario.network)
    c = edge_costs(network, total_flows(model, profile, driver_profile))
    per_user = np.concatenate([(block * (c @ a)).sum(axis=1)
                               for a, block in zip(model.user_mats, profile.strategies)])
    labels = scenario.user_labels()
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for lab, v in zip(labels, per_user):
        sums[lab] = sums.get(lab, 0.0) + float(v)
        counts[lab] = counts.get(lab, 0) + 1
    per_od = {od: sums[od] / counts[od] for od in sums}
    dsums: dict[str, float] = {}
    dcounts: dict[str, int] = {}
    for grp, a, p in zip(scenario.drivers, model.driver_mats, driver_profile.strategies):
        dsums[grp.od_label] = dsums.get(grp.od_label, 0.0) + grp.count * float(p @ (c @ a))
        dcounts[grp.od_label] = dcounts.get(grp.od_label, 0) + grp.count
    driver_per_od = {od: dsums[od] / dcounts[od] for od in dsums}
    return CostReport(per_od, counts, float(per_user.sum()), per_user, driver_per_od)


def selfish(scenario: Scenario) -> Profile:
    """Everyone gets the feasible path that is shortest under driver-only traffic.

    All users are assigned at once, so identical users pile onto the same path.
    Ties go to the lowest path index.
    """
    model = scenario.model
    drivers = scenario.driver_profile(scenario.network)
    c = edge_costs(scenario.network, driver_edge_flows(model, drivers))
    choices = [int(np.argmin(c @ a)) for a in model.user_mats]
    return Profile.pure(scenario.users, choices)


def with_shortest_paths(scenario: Scenario) -> Scenario:
    """Append each group's graph-wide shortest path (under driver-only traffic) if missing."""
    drivers = scenario.driver_profile(scenario.network)
    c = edge_costs(scenario.network, driver_edge_flows(scenario.model, drivers))
    users = []
    for g in scenario.users:
        sp = shortest_path(scenario.network, g.od[0], g.od[1], c)
        if sp is not None and sp not in g.paths:
            g = replace(g, paths=g.paths + (sp,))
        users.append(g)
    return replace(scenario, users=tuple(users))


def uniform(scenario: Scenario) -> Profile:
    return Profile.uniform(scenario.users)


def misinformed(scenario: Scenario, config: SolverConfig | None = None) -> Profile:
    """Equilibrium planned as if there were no drivers; evaluate it with `evaluate` as usual."""
    profile, _ = equilibrium(scenario.without_drivers(), config or scenario.solver)
    return profile


def informed(scenario: Scenario, config: SolverConfig | None = None) -> Profile:
    """The proposed plan at the initial network state (the WU recommendation)."""
    profile, _ = equilibrium(scenario, config or scenario.solver)
    return profile
