"""Scenarios: network, populations, a timeline of travel-time events and solver settings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from .behavior import DriverGroup, DriverProfile, Profile, UserGroup, initial_costs, mnl_strategy, validate_group
from .cost import CostModel
from .errors import ValidationError
from .network import Edge, Network, validate_network

if TYPE_CHECKING:
    from .solver import SolverConfig

DRIVER_COST_MODES = ("free_flow", "at_initial_profile")
DRIVER_REEVAL = ("never", "on_event", "every_step")


@dataclass(frozen=True)
class Event:
    """Change of one edge's free-flow time at the start of ``step``.

    Exactly one of ``set_t`` (new minutes) or ``scale_t`` (factor) is given.
    """

    step: int
    edge: str
    set_t: float | None = None
    scale_t: float | None = None

    def __post_init__(self):
        if (self.set_t is None) == (self.scale_t is None):
            raise ValidationError("event needs exactly one of set_t / scale_t")
        if self.scale_t is not None and not self.scale_t > 0:
            raise ValidationError(f"scale_t must be > 0, got {self.scale_t}")
        if self.set_t is not None and not self.set_t > 0:
            raise ValidationError(f"set_t must be > 0, got {self.set_t}")
        if self.step < 0:
            raise ValidationError(f"event step must be >= 0, got {self.step}")


def apply_event(network: Network, event: Event) -> Network:
    """Return a new network with the event's edge travel time changed."""
    e = network.edge(event.edge)
    t = event.set_t if event.set_t is not None else e.free_flow_time * event.scale_t
    return network.with_edge(replace(e, free_flow_time=float(t)))


@dataclass(frozen=True)
class Scenario:
    network: Network
    users: tuple[UserGroup, ...]
    drivers: tuple[DriverGroup, ...] = ()
    timeline: tuple[Event, ...] = ()
    horizon: int = 0
    driver_cost_mode: str = "free_flow"
    driver_reeval: str = "never"
    solver: "SolverConfig | None" = None
    selfish_graph_wide: bool = False
    name: str = ""
    notes: str = ""
    _model: CostModel | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "drivers", tuple(self.drivers))
        object.__setattr__(self, "timeline", tuple(sorted(self.timeline, key=lambda ev: ev.step)))

    @property
    def model(self) -> CostModel:
        if self._model is None:
            object.__setattr__(self, "_model", CostModel.build(self.network, self.users, self.drivers))
        return self._model

    def validate(self) -> list[str]:
        problems = [f"network: {p}" for p in validate_network(self.network)]
        if problems:
            return problems
        for i, g in enumerate(self.users):
            problems += validate_group(self.network, g, f"users[{i}]")
        for i, g in enumerate(self.drivers):
            problems += validate_group(self.network, g, f"drivers[{i}]")
            if not (math.isfinite(g.alpha) and math.isfinite(g.beta)):
                problems.append(f"drivers[{i}]: alpha/beta must be finite")
        if not self.users:
            problems.append("users: at least one user group is required")
        if not (isinstance(self.horizon, int) and self.horizon >= 0):
            problems.append(f"horizon must be an integer >= 0, got {self.horizon}")
        for i, ev in enumerate(self.timeline):
            if ev.edge not in self.network.edge_ids:
                problems.append(f"timeline[{i}].edge: unknown edge {ev.edge!r}")
            if ev.step > self.horizon:
                problems.append(f"timeline[{i}].step {ev.step} is beyond horizon {self.horizon}")
        if self.driver_cost_mode not in DRIVER_COST_MODES:
            problems.append(f"driver_cost_mode must be one of {DRIVER_COST_MODES}")
        if self.driver_reeval not in DRIVER_REEVAL:
            problems.append(f"driver_reeval must be one of {DRIVER_REEVAL}")
        return problems

    def check(self) -> "Scenario":
        problems = self.validate()
        if problems:
            raise ValidationError("; ".join(problems))
        return self

    def network_at(self, step: int) -> Network:
        """Network state after applying every event scheduled at or before ``step``."""
        net = self.network
        for ev in self.timeline:
            if ev.step <= step:
                net = apply_event(net, ev)
        return net

    def event_steps(self) -> list[int]:
        return sorted({ev.step for ev in self.timeline})

    def driver_profile(self, network: Network | None = None, profile: Profile | None = None,
                       previous: DriverProfile | None = None) -> DriverProfile:
        """MNL strategies of every driver group.

        In ``free_flow`` mode drivers see free-flow path times of ``network``;
        in ``at_initial_profile`` mode they see BPR costs at the flows of
        ``profile`` (uniform users by default) plus ``previous`` driver choices
        (free-flow MNL by default).
        """
        network = network or self.network
        if self.driver_cost_mode == "free_flow":
            return DriverProfile(tuple(mnl_strategy(g, initial_costs(network, g)) for g in self.drivers))
        model = self.model.with_network(network)
        if profile is None:
            profile = Profile.uniform(self.users)
        if previous is None:
            previous = DriverProfile(tuple(mnl_strategy(g, initial_costs(network, g)) for g in self.drivers))
        return DriverProfile(tuple(
            mnl_strategy(g, initial_costs(network, g, "at_profile", profile, previous, model))
            for g in self.drivers))

    def without_drivers(self) -> "Scenario":
        return replace(self, drivers=())

    def without_events(self) -> "Scenario":
        return replace(self, timeline=())

    def frozen_at(self, step: int = 0) -> "Scenario":
        """Event-free copy whose network is the state at ``step``."""
        return replace(self, network=self.network_at(step), timeline=())

    def od_labels(self) -> list[str]:
        seen = []
        for g in self.users:
            if g.od_label not in seen:
                seen.append(g.od_label)
        return seen

    def user_labels(self) -> list[str]:
        return [g.od_label for g in self.users for _ in range(g.count)]


def edge(id: str, tail, head, t: float, k: float) -> Edge:
    return Edge(str(id), str(tail), str(head), float(t), float(k))
