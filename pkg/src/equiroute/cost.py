"""BPR link costs, flow aggregation, expected user costs and their derivatives.

Two evaluation routes are kept side by side on purpose:

* the *profile* form rebuilds the flow decomposition (own flow, other users,
  drivers) from the full strategy profile, and
* the *conditions* form works only from the broadcast per-edge load ratios
  ``m`` plus the user's own strategy, which is all a local app would see.

At consistent inputs the two agree to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .behavior import DriverGroup, DriverProfile, Profile, UserGroup
from .errors import NumericalError, ValidationError
from .network import Edge, Network, path_matrix

PSD_EIG_FLOOR = -1e-9


@dataclass(frozen=True, eq=False)
class CostModel:
    """Network arrays plus per-group road-path matrices (``|E| x k_g``)."""

    network: Network
    users: tuple[UserGroup, ...]
    drivers: tuple[DriverGroup, ...]
    t: np.ndarray
    k: np.ndarray
    user_mats: tuple[np.ndarray, ...]
    driver_mats: tuple[np.ndarray, ...]

    @classmethod
    def build(cls, network: Network, users: Sequence[UserGroup] = (),
              drivers: Sequence[DriverGroup] = ()) -> "CostModel":
        users, drivers = tuple(users), tuple(drivers)
        umats = tuple(path_matrix(network, g.paths) for g in users)
        dmats = tuple(path_matrix(network, g.paths) for g in drivers)
        for a in umats + dmats:
            a.setflags(write=False)
        t, k = network.free_flow_times, network.capacities
        t.setflags(write=False)
        k.setflags(write=False)
        return cls(network, users, drivers, t, k, umats, dmats)

    def with_network(self, network: Network) -> "CostModel":
        if network.edge_ids != self.network.edge_ids:
            raise ValidationError("network edge layout changed")
        t, k = network.free_flow_times, network.capacities
        t.setflags(write=False)
        k.setflags(write=False)
        return CostModel(network, self.users, self.drivers, t, k, self.user_mats, self.driver_mats)

    def without_drivers(self) -> "CostModel":
        return CostModel(self.network, self.users, (), self.t, self.k, self.user_mats, ())

    @property
    def eta(self) -> float:
        return self.network.bpr_eta

    @property
    def zeta(self) -> float:
        return self.network.bpr_zeta

    @property
    def n_users(self) -> int:
        return sum(g.count for g in self.users)

    def locate(self, user: int) -> tuple[int, int]:
        for g, grp in enumerate(self.users):
            if user < grp.count:
                return g, user
            user -= grp.count
        raise IndexError("user index out of range")

    def user_group_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.users)), [g.count for g in self.users])


@dataclass(frozen=True, eq=False)
class FlowDecomposition:
    """Per-edge flows seen from one user.

    ``own`` is the focus user's expected flow, ``others_users`` the rest of the
    recommendation-system users, ``drivers`` the non-users.
    """

    own: np.ndarray
    others_users: np.ndarray
    drivers: np.ndarray

    @property
    def aggregate_others(self) -> np.ndarray:
        return self.others_users + self.drivers

    @property
    def users_total(self) -> np.ndarray:
        return self.own + self.others_users

    @property
    def total(self) -> np.ndarray:
        return self.own + self.aggregate_others


@dataclass(frozen=True, eq=False)
class TrafficConditions:
    """Broadcast per-edge load ratio ``m_e = total flow / capacity`` at a step."""

    m: np.ndarray
    step: int = 0


def bpr(edge: Edge, flow: float, eta: float, zeta: float) -> float:
    if flow < 0:
        raise ValidationError(f"negative flow {flow} on edge {edge.id!r}")
    return edge.free_flow_time * (1.0 + eta * (flow / edge.capacity) ** zeta)


def edge_costs(network: Network, flows: np.ndarray) -> np.ndarray:
    flows = np.asarray(flows, dtype=float)
    if np.any(flows < 0):
        raise ValidationError("negative edge flow")
    return network.free_flow_times * (1.0 + network.bpr_eta * (flows / network.capacities) ** network.bpr_zeta)


def user_edge_flows(model: CostModel, profile: Profile) -> np.ndarray:
    f = np.zeros(len(model.t))
    for a, block in zip(model.user_mats, profile.strategies):
        f += a @ block.sum(axis=0)
    return f


def driver_edge_flows(model: CostModel, driver_profile: DriverProfile | None) -> np.ndarray:
    f = np.zeros(len(model.t))
    if driver_profile is None:
        return f
    for a, grp, p in zip(model.driver_mats, model.drivers, driver_profile.strategies):
        f += grp.count * (a @ p)
    return f


def total_flows(model: CostModel, profile: Profile | None, driver_profile: DriverProfile | None) -> np.ndarray:
    f = driver_edge_flows(model, driver_profile)
    if profile is not None:
        f = f + user_edge_flows(model, profile)
    return f


def user_flows(model: CostModel, profile: Profile, driver_profile: DriverProfile | None = None,
               focus_user: int | None = None) -> FlowDecomposition:
    fr = user_edge_flows(model, profile)
    fo = driver_edge_flows(model, driver_profile)
    if focus_user is None:
        own = np.zeros_like(fr)
    else:
        g, j = model.locate(focus_user)
        own = model.user_mats[g] @ profile.strategies[g][j]
    # clip guards rounding when own is nearly all of fr
    return FlowDecomposition(own, np.maximum(fr - own, 0.0), fo)


def conditions(model: CostModel, profile: Profile, driver_profile: DriverProfile | None,
               step: int = 0) -> TrafficConditions:
    m = total_flows(model, profile, driver_profile) / model.k
    m.setflags(write=False)
    return TrafficConditions(m, step)


def path_costs(model: CostModel, user: int, decomposition: FlowDecomposition) -> np.ndarray:
    g, _ = model.locate(user)
    return edge_costs(model.network, decomposition.total) @ model.user_mats[g]


def path_cost(model: CostModel, user: int, path_index: int, decomposition: FlowDecomposition) -> float:
    return float(path_costs(model, user, decomposition)[path_index])


def expected_cost(model: CostModel, user: int, profile: Profile,
                  driver_profile: DriverProfile | None = None) -> float:
    dec = user_flows(model, profile, driver_profile, user)
    return float(profile.strategy(user) @ path_costs(model, user, dec))


def expected_cost_from_conditions(model: CostModel, group: int, strategy, m) -> float:
    """User cost computed only from the broadcast load ratios."""
    c = model.t * (1.0 + model.eta * np.asarray(m) ** model.zeta)
    return float(np.asarray(strategy) @ (c @ model.user_mats[group]))


def _pow(base: np.ndarray, p: float) -> np.ndarray:
    # 0**0 == 1 and 0**p == 0 for p > 0, matching the limit of the BPR derivative
    return np.power(base, p)


def _own_term_weights(model: CostModel, m: np.ndarray) -> np.ndarray:
    zeta = model.zeta
    if zeta < 1 and np.any(m == 0):
        raise NumericalError(f"BPR derivative is singular at zero flow for zeta={zeta} < 1")
    return model.t * model.eta * zeta * _pow(m, zeta - 1) / model.k


def gradient_from_conditions(model: CostModel, group: int, strategy, m) -> np.ndarray:
    """Gradient of the conditions-form cost in the user's own probabilities.

    The user infers its own per-edge flow from its strategy.
    """
    m = np.asarray(m, dtype=float)
    a = model.user_mats[group]
    own = a @ np.asarray(strategy, dtype=float)
    base = model.t * (1.0 + model.eta * m ** model.zeta)
    return (base + own * _own_term_weights(model, m)) @ a


def gradient(model: CostModel, user: int, profile: Profile,
             driver_profile: DriverProfile | None = None,
             strategy: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the user's expected cost from the explicit flow decomposition.

    ``strategy`` optionally replaces the user's own strategy, holding everyone
    else fixed.
    """
    g, _ = model.locate(user)
    dec = user_flows(model, profile, driver_profile, user)
    a = model.user_mats[g]
    own = dec.own if strategy is None else a @ np.asarray(strategy, dtype=float)
    total = dec.aggregate_others + own
    ratio = total / model.k
    eta, zeta = model.eta, model.zeta
    if zeta < 1 and np.any((ratio == 0) & (a.sum(axis=1) > 0)):
        raise NumericalError(f"BPR derivative is singular at zero flow for zeta={zeta} < 1")
    per_edge = model.t * (1.0 + eta * ratio ** zeta + zeta * own * (eta / model.k) * _pow(ratio, zeta - 1))
    return per_edge @ a


def all_gradients(model: CostModel, profile: Profile, m: np.ndarray) -> list[np.ndarray]:
    """Conditions-form gradients for every user at once, one ``(count, k)`` block per group."""
    base = model.t * (1.0 + model.eta * m ** model.zeta)
    w = _own_term_weights(model, m)
    out = []
    for a, block in zip(model.user_mats, profile.strategies):
        own = block @ a.T
        out.append(base @ a + (own * w) @ a)
    return out


def all_expected_costs(model: CostModel, profile: Profile, m: np.ndarray) -> np.ndarray:
    """Conditions-form expected cost of every user, in global user order."""
    c = model.t * (1.0 + model.eta * m ** model.zeta)
    return np.concatenate([(block * (c @ a)).sum(axis=1)
                           for a, block in zip(model.user_mats, profile.strategies)]) \
        if profile.strategies else np.zeros(0)


def hessian(model: CostModel, user: int, profile: Profile,
            driver_profile: DriverProfile | None = None) -> np.ndarray:
    """Analytic Hessian of the user's expected cost in its own probabilities."""
    g, _ = model.locate(user)
    dec = user_flows(model, profile, driver_profile, user)
    a = model.user_mats[g]
    eta, zeta = model.eta, model.zeta
    ratio = dec.total / model.k
    k = model.k
    w = 2 * zeta * model.t / k * _pow(ratio, zeta - 1)
    if zeta != 1:
        # f_u * ratio**(zeta-2) -> 0 as ratio -> 0 for zeta > 1, because f_u <= k * ratio
        safe = np.where(ratio > 0, ratio, 1.0)
        curv = np.where(ratio > 0, dec.own * _pow(safe, zeta - 2), 0.0)
        w = w + zeta * (zeta - 1) * model.t / k ** 2 * curv
    w = eta * w
    return (a * w[:, None]).T @ a


@dataclass(frozen=True)
class ConvexityReport:
    hessian: np.ndarray
    diag_dominant: bool
    psd: bool
    min_eigenvalue: float


def convexity_diagnostics(model: CostModel, user: int, profile: Profile,
                          driver_profile: DriverProfile | None = None) -> ConvexityReport:
    h = hessian(model, user, profile, driver_profile)
    diag = np.abs(np.diag(h))
    off = np.abs(h).sum(axis=1) - diag
    dd = bool(np.all(diag >= off - 1e-12 * np.maximum(1.0, diag)) and np.all(np.diag(h) >= 0))
    try:
        eig = float(np.linalg.eigvalsh(h).min())
        psd = eig >= PSD_EIG_FLOOR
    except np.linalg.LinAlgError:
        eig = float("nan")
        try:
            np.linalg.cholesky(h + abs(PSD_EIG_FLOOR) * np.eye(len(h)))
            psd = True
        except np.linalg.LinAlgError:
            psd = False
    return ConvexityReport(h, dd, psd, eig)
