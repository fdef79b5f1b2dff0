"""User and driver populations, mixed strategies and the MNL driver model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .network import Network, Path, validate_path

SIMPLEX_ATOL = 1e-12


@dataclass(frozen=True)
class UserGroup:
    """``count`` identical recommendation-system users sharing an OD pair and path set.

    Each member is still a separate player with its own strategy.
    """

    od: tuple[str, str]
    paths: tuple[Path, ...]
    count: int = 1
    update_prob: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "od", tuple(self.od))
        object.__setattr__(self, "paths", tuple(self.paths))

    @property
    def od_label(self) -> str:
        return f"{self.od[0]}-{self.od[1]}"

    @property
    def n_paths(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class DriverGroup:
    """Non-users choosing paths by multinomial logit with value -alpha - beta * cost."""

    od: tuple[str, str]
    paths: tuple[Path, ...]
    count: int = 1
    alpha: float = 0.0
    beta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "od", tuple(self.od))
        object.__setattr__(self, "paths", tuple(self.paths))

    @property
    def od_label(self) -> str:
        return f"{self.od[0]}-{self.od[1]}"

    @property
    def n_paths(self) -> int:
        return len(self.paths)


def validate_group(network: Network, group: UserGroup | DriverGroup, where: str = "group") -> list[str]:
    problems = []
    if not group.paths:
        problems.append(f"{where}: path list is empty")
    for i, p in enumerate(group.paths):
        try:
            if not validate_path(network, p, group.od):
                problems.append(f"{where}.paths[{i}]: does not chain {group.od[0]} -> {group.od[1]}")
        except ValidationError as exc:
            problems.append(f"{where}.paths[{i}]: {exc}")
    if not (isinstance(group.count, (int, np.integer)) and group.count >= 1):
        problems.append(f"{where}.count must be an integer >= 1, got {group.count}")
    if isinstance(group, UserGroup) and not (0 < group.update_prob <= 1):
        problems.append(f"{where}.pi must be in (0, 1], got {group.update_prob}")
    return problems


def check_strategy(p: np.ndarray, atol: float = SIMPLEX_ATOL) -> None:
    p = np.asarray(p, dtype=float)
    if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > atol * max(1, p.size):
        raise ValidationError(f"not a mixed strategy: {p}")


@dataclass(frozen=True, eq=False)
class Profile:
    """Per-user mixed strategies, stored as one ``(count, k)`` block per user group.

    Users are numbered globally in group order, so the first group's users come
    first.
    """

    strategies: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = []
        for s in self.strategies:
            a = np.array(s, dtype=float, ndmin=2)
            a.setflags(write=False)
            blocks.append(a)
        object.__setattr__(self, "strategies", tuple(blocks))

    @classmethod
    def uniform(cls, groups: Sequence[UserGroup]) -> "Profile":
        return cls(tuple(np.full((g.count, g.n_paths), 1.0 / g.n_paths) for g in groups))

    @classmethod
    def pure(cls, groups: Sequence[UserGroup], choices: Sequence[int]) -> "Profile":
        blocks = []
        for g, i in zip(groups, choices):
            b = np.zeros((g.count, g.n_paths))
            b[:, i] = 1.0
            blocks.append(b)
        return cls(tuple(blocks))

    @property
    def n_users(self) -> int:
        return sum(b.shape[0] for b in self.strategies)

    def locate(self, user: int) -> tuple[int, int]:
        for g, b in enumerate(self.strategies):
            if user < b.shape[0]:
                return g, user
            user -= b.shape[0]
        raise IndexError("user index out of range")

    def strategy(self, user: int) -> np.ndarray:
        g, j = self.locate(user)
        return self.strategies[g][j]

    def with_strategy(self, user: int, p: np.ndarray) -> "Profile":
        g, j = self.locate(user)
        block = self.strategies[g].copy()
        block[j] = p
        blocks = list(self.strategies)
        blocks[g] = block
        return Profile(tuple(blocks))

    def flat(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.strategies]) if self.strategies else np.zeros(0)

    def max_abs_diff(self, other: "Profile") -> float:
        if not self.strategies:
            return 0.0
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.strategies, other.strategies))

    def check(self, groups: Sequence[UserGroup] | None = None) -> None:
        if groups is not None:
            shapes = [(g.count, g.n_paths) for g in groups]
            if shapes != [b.shape for b in self.strategies]:
                raise ValidationError(f"profile shapes {[b.shape for b in self.strategies]} != {shapes}")
        for b in self.strategies:
            if np.any(b < 0) or np.any(np.abs(b.sum(axis=1) - 1) > 1e-9):
                raise ValidationError("profile has an entry outside the simplex")

    def __eq__(self, other):
        if not isinstance(other, Profile) or len(self.strategies) != len(other.strategies):
            return NotImplemented
        return all(a.shape == b.shape and np.array_equal(a, b)
                   for a, b in zip(self.strategies, other.strategies))

    def __hash__(self):
        return hash(self.flat().tobytes())


@dataclass(frozen=True, eq=False)
class DriverProfile:
    """One MNL strategy per driver group, shared by all ``count`` members."""

    strategies: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = []
        for s in self.strategies:
            a = np.array(s, dtype=float)
            a.setflags(write=False)
            blocks.append(a)
        object.__setattr__(self, "strategies", tuple(blocks))

    def __eq__(self, other):
        if not isinstance(other, DriverProfile) or len(self.strategies) != len(other.strategies):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.strategies, other.strategies))

    def __hash__(self):
        return hash(tuple(a.tobytes() for a in self.strategies))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("project_simplex expects a non-empty vector")
    return project_simplex_rows(v[None, :])[0]


def project_simplex_rows(v: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection of a 2-D array."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValidationError("cannot project non-finite values onto the simplex")
    n, k = v.shape
    if k == 1:
        return np.ones_like(v)
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    cond = u - css / ind > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    w = np.maximum(v - theta[:, None], 0.0)
    # one cleanup pass keeps sums at 1 to machine precision
    w /= w.sum(axis=1, keepdims=True)
    return w


def mnl_strategy(group: DriverGroup, costs) -> np.ndarray:
    """Logit path-choice probabilities for a driver group given per-path costs."""
    costs = np.asarray(costs, dtype=float)
    if group.n_paths == 0:
        raise ValidationError("driver group has no paths")
    if costs.shape != (group.n_paths,):
        raise ValidationError(f"expected {group.n_paths} path costs, got shape {costs.shape}")
    values = -group.alpha - group.beta * costs
    values = values - values.max()
    w = np.exp(values)
    return w / w.sum()


def initial_costs(network: Network, group: DriverGroup, mode: str = "free_flow",
                  profile: Profile | None = None, driver_profile: DriverProfile | None = None,
                  model=None) -> np.ndarray:
    """Per-path costs a driver group perceives before choosing.

    ``free_flow`` sums free-flow times; ``at_profile`` sums BPR costs at the
    flows induced by ``profile`` and ``driver_profile`` (``model`` must then be
    the `CostModel` those profiles belong to).
    """
    for i, p in enumerate(group.paths):
        if not validate_path(network, p, group.od):
            raise ValidationError(f"driver path {i} does not chain {group.od}")
    t = network.free_flow_times
    if mode == "free_flow":
        return np.array([sum(t[network.index_of(e)] for e in p.edge_ids) for p in group.paths])
    if mode == "at_profile":
        from .cost import edge_costs, total_flows

        flows = total_flows(model, profile, driver_profile)
        c = edge_costs(network, flows)
        return np.array([sum(c[network.index_of(e)] for e in p.edge_ids) for p in group.paths])
    raise ValidationError(f"unknown driver cost mode {mode!r}")


def driver_flows(network: Network, groups: Sequence[DriverGroup], driver_profile: DriverProfile) -> np.ndarray:
    """Expected per-edge driver flow: each group contributes ``count`` times its strategy."""
    f = np.zeros(len(network.edges))
    for g, p in zip(groups, driver_profile.strategies):
        for prob, path in zip(p, g.paths):
            for eid in path.edge_ids:
                f[network.index_of(eid)] += g.count * prob
    return f
