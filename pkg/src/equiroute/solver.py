"""Projected-gradient equilibrium computation, dynamic update schemes and the NE certificate."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .behavior import DriverProfile, Profile, project_simplex, project_simplex_rows
from .cost import (CostModel, TrafficConditions, all_expected_costs, all_gradients, conditions,
                   convexity_diagnostics, edge_costs, user_flows)
from .errors import NumericalError, ValidationError
from .scenario import Scenario, apply_event

SCHEMES = ("parallel", "random")


@dataclass(frozen=True)
class StepSchedule:
    """Either a constant step or the harmonic ``c / (n0 + n)`` (square-summable) schedule."""

    kind: str = "constant"
    alpha: float = 0.01
    c: float = 1.0
    n0: float = 1.0
    reset_on_event: bool = True

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic"):
            raise ValidationError(f"unknown step schedule {self.kind!r}")
        if self.kind == "constant" and not self.alpha > 0:
            raise ValidationError(f"step size alpha must be > 0, got {self.alpha}")
        if self.kind == "harmonic" and not (self.c > 0 and self.n0 >= 1):
            raise ValidationError(f"harmonic schedule needs c > 0 and n0 >= 1, got c={self.c}, n0={self.n0}")

    @classmethod
    def constant(cls, alpha: float, reset_on_event: bool = True) -> "StepSchedule":
        return cls("constant", alpha=alpha, reset_on_event=reset_on_event)

    @classmethod
    def harmonic(cls, c: float, n0: float = 1.0, reset_on_event: bool = True) -> "StepSchedule":
        return cls("harmonic", c=c, n0=n0, reset_on_event=reset_on_event)

    def at(self, n: int) -> float:
        if self.kind == "constant":
            return self.alpha
        return self.c / (self.n0 + n)


@dataclass(frozen=True)
class SolverConfig:
    schedule: StepSchedule = field(default_factory=StepSchedule)
    tol: float = 1e-6
    window: int = 10
    max_steps: int = 10000
    seed: int = 0
    scheme: str = "parallel"
    br_tol: float = 1e-10
    br_max_steps: int = 20000
    gap_rel_tol: float = 1e-3

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if not (isinstance(self.window, int) and self.window >= 1):
            raise ValidationError(f"window must be an integer >= 1, got {self.window}")
        if not (isinstance(self.max_steps, int) and self.max_steps >= 1):
            raise ValidationError(f"max_steps must be an integer >= 1, got {self.max_steps}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass
class Trajectory:
    """Per-step record of a run; index ``n`` holds the state at step ``n``."""

    profiles: list[Profile] = field(default_factory=list)
    conditions: list[TrafficConditions] = field(default_factory=list)
    costs: list[np.ndarray] = field(default_factory=list)
    flags: list[np.ndarray] = field(default_factory=list)
    driver_profiles: list[DriverProfile] = field(default_factory=list)
    max_gradient_norm: float = 0.0

    def __len__(self) -> int:
        return len(self.profiles)

    @property
    def final(self) -> Profile:
        return self.profiles[-1]

    def residuals(self) -> np.ndarray:
        """``r[t] = max |P(t+1) - P(t)|`` over all strategy entries."""
        return np.array([b.max_abs_diff(a) for a, b in zip(self.profiles, self.profiles[1:])])


class UpdateCoins:
    """Independent uniform stream per user, derived from ``(seed, user index)``.

    Draws are buffered in blocks; the per-user sequence does not depend on the
    block size.
    """

    def __init__(self, seed: int, n_users: int, block: int = 512):
        self._gens = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(u,))))
                      for u in range(n_users)]
        self._block = block
        self._buf = np.empty((n_users, 0))
        self._pos = 0

    def draw(self) -> np.ndarray:
        if self._pos >= self._buf.shape[1]:
            self._buf = np.stack([g.random(self._block) for g in self._gens]) if self._gens \
                else np.empty((0, self._block))
            self._pos = 0
        out = self._buf[:, self._pos]
        self._pos += 1
        return out


def _checked(grads: list[np.ndarray]) -> list[np.ndarray]:
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient encountered")
    return grads


def parallel_step(model: CostModel, profile: Profile, m: np.ndarray, alpha: float,
                  grads: list[np.ndarray] | None = None) -> Profile:
    """Every user takes one projected-gradient step from the same conditions snapshot."""
    if grads is None:
        grads = _checked(all_gradients(model, profile, np.asarray(m)))
    return Profile(tuple(project_simplex_rows(block - alpha * g)
                         for block, g in zip(profile.strategies, grads)))


def random_step(model: CostModel, profile: Profile, m: np.ndarray, alpha: float,
                update_probs: Sequence[float], coins,
                grads: list[np.ndarray] | None = None) -> tuple[Profile, np.ndarray]:
    """Each user independently applies the parallel rule with its own probability.

    ``update_probs`` is per user; ``coins`` is an `UpdateCoins` or an array of
    per-user uniforms for this step. Returns the new profile and update flags.
    """
    u = coins.draw() if hasattr(coins, "draw") else np.asarray(coins, dtype=float)
    flags = u < np.asarray(update_probs, dtype=float)
    proposal = parallel_step(model, profile, m, alpha, grads)
    blocks, start = [], 0
    for old, new in zip(profile.strategies, proposal.strategies):
        f = flags[start:start + old.shape[0]]
        blocks.append(np.where(f[:, None], new, old))
        start += old.shape[0]
    return Profile(tuple(blocks)), flags


def user_update_probs(scenario: Scenario) -> np.ndarray:
    return np.repeat([g.update_prob for g in scenario.users], [g.count for g in scenario.users])


def solve(scenario: Scenario, config: SolverConfig | None = None, steps: int | None = None,
          stop_when_stable: bool = False, initial: Profile | None = None) -> Trajectory:
    """Iterate the configured update scheme over the scenario timeline.

    Runs ``steps`` transitions (default: the scenario horizon). Events apply at
    the start of their step, before that step's conditions are broadcast. With
    ``stop_when_stable`` the run may end early, but only once no events remain
    and the residual has stayed below ``tol`` for ``window`` steps.
    """
    config = config or scenario.solver or SolverConfig()
    steps = scenario.horizon if steps is None else steps
    sched = config.schedule
    events: dict[int, list] = {}
    for ev in scenario.timeline:
        events.setdefault(ev.step, []).append(ev)
    last_event = max(events) if events else -1

    network = scenario.network
    for ev in events.get(0, []):
        network = apply_event(network, ev)
    model = scenario.model.with_network(network)
    profile = initial if initial is not None else Profile.uniform(scenario.users)
    profile.check(scenario.users)
    drivers = scenario.driver_profile(network)
    coins = UpdateCoins(config.seed, profile.n_users) if config.scheme == "random" else None
    probs = user_update_probs(scenario)
    no_flags = np.zeros(profile.n_users, dtype=bool)

    traj = Trajectory()
    flags = no_flags
    since_reset = 0
    calm = 0
    for n in range(steps + 1):
        if n > 0 and n in events:
            for ev in events[n]:
                network = apply_event(network, ev)
            model = model.with_network(network)
            if scenario.driver_reeval == "on_event":
                drivers = scenario.driver_profile(network, profile, drivers)
            if sched.reset_on_event:
                since_reset = 0
        if n > 0 and scenario.driver_reeval == "every_step":
            drivers = scenario.driver_profile(network, profile, drivers)
        cond = conditions(model, profile, drivers, step=n)
        traj.profiles.append(profile)
        traj.conditions.append(cond)
        traj.costs.append(all_expected_costs(model, profile, cond.m))
        traj.flags.append(flags)
        traj.driver_profiles.append(drivers)
        if n == steps:
            break
        if stop_when_stable and calm >= config.window and n >= last_event:
            break
        alpha = sched.at(since_reset)
        grads = _checked(all_gradients(model, profile, cond.m))
        traj.max_gradient_norm = max(traj.max_gradient_norm,
                                     max(float(np.max(np.linalg.norm(g, axis=1))) for g in grads))
        if config.scheme == "parallel":
            new = parallel_step(model, profile, cond.m, alpha, grads)
            flags = ~no_flags
        else:
            new, flags = random_step(model, profile, cond.m, alpha, probs, coins, grads)
        calm = calm + 1 if new.max_abs_diff(profile) < config.tol else 0
        profile = new
        since_reset += 1
    return traj


def equilibrium(scenario: Scenario, config: SolverConfig | None = None, step: int = 0) -> tuple[Profile, Trajectory]:
    """Static NE plan on the network state at ``step`` using the parallel scheme."""
    config = config or scenario.solver or SolverConfig()
    traj = solve(scenario.frozen_at(step), replace(config, scheme="parallel"),
                 steps=config.max_steps, stop_when_stable=True)
    return traj.final, traj


def stabilization_index(trajectory: Trajectory | Sequence[float], tol: float, window: int) -> int | None:
    """Smallest step from which the residual stays below ``tol`` for ``window`` steps.

    With fewer residuals than ``window``, all of them must be below ``tol``.
    """
    r = trajectory.residuals() if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    if r.size == 0:
        return 0
    need = min(window, r.size)
    run = 0
    for t, below in enumerate(r < tol):
        run = run + 1 if below else 0
        if run >= need:
            return t - need + 1
    return None


def _own_cost_functions(model: CostModel, user: int, profile: Profile,
                        driver_profile: DriverProfile | None) -> tuple[Callable, Callable]:
    g, _ = model.locate(user)
    a = model.user_mats[g]
    others = user_flows(model, profile, driver_profile, user).aggregate_others
    t, k, eta, zeta = model.t, model.k, model.eta, model.zeta
    w_own = t * eta * zeta / k

    def value(x):
        ratio = (others + a @ x) / k
        return float(x @ ((t * (1 + eta * ratio ** zeta)) @ a))

    def grad(x):
        own = a @ x
        ratio = (others + own) / k
        return (t * (1 + eta * ratio ** zeta) + own * w_own * np.power(ratio, zeta - 1)) @ a

    return value, grad


def best_response(model: CostModel, user: int, profile: Profile,
                  driver_profile: DriverProfile | None = None,
                  config: SolverConfig | None = None) -> tuple[np.ndarray, float]:
    """Minimize the user's expected cost over its own simplex, others held fixed.

    Projected gradient with backtracking, restarted from every vertex and the
    uniform point; a start stops once its step or its Frank-Wolfe gap falls
    below ``br_tol``. Returns the best strategy found and its cost.
    """
    config = config or SolverConfig()
    g, _ = model.locate(user)
    k = model.user_mats[g].shape[1]
    value, grad = _own_cost_functions(model, user, profile, driver_profile)
    if k == 1:
        x = np.ones(1)
        return x, value(x)
    starts = [np.eye(k)[i] for i in range(k)] + [np.full(k, 1.0 / k)]
    best_x, best_v = None, np.inf
    for x in starts:
        fx, gx = value(x), grad(x)
        step = 1.0
        for _ in range(config.br_max_steps):
            if not np.all(np.isfinite(gx)):
                raise NumericalError(f"non-finite gradient for user {user}")
            # Frank-Wolfe gap bounds f(x) - min f when f is convex
            if gx @ x - gx.min() <= config.br_tol * max(1.0, abs(fx)):
                break
            while True:
                y = project_simplex(x - step * gx)
                d = y - x
                fy = value(y)
                if fy <= fx + gx @ d + (d @ d) / (2 * step) + 1e-15 * abs(fx) or step < 1e-14:
                    break
                step *= 0.5
            x, fx, gx = y, fy, grad(y)
            if np.max(np.abs(d)) < config.br_tol:
                break
            step *= 1.5
        if fx < best_v:
            best_x, best_v = x, fx
    return best_x, best_v


@dataclass(frozen=True)
class GapReport:
    gaps: np.ndarray
    values: np.ndarray
    best_values: np.ndarray
    best_strategies: tuple[np.ndarray, ...]
    certified: bool
    heuristic: bool
    rel_tol: float

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max()) if self.gaps.size else 0.0

    @property
    def max_relative_gap(self) -> float:
        if not self.gaps.size:
            return 0.0
        return float(np.max(self.gaps / np.maximum(1.0, self.values)))


def deviation_gap(model: CostModel, profile: Profile, driver_profile: DriverProfile | None = None,
                  config: SolverConfig | None = None) -> GapReport:
    """Per-user improvement available by unilateral deviation: the NE certificate.

    Users of one group holding identical strategies share a single best-response
    computation.
    """
    config = config or SolverConfig()
    n = profile.n_users
    gaps, values, best = np.zeros(n), np.zeros(n), np.zeros(n)
    best_x: list[np.ndarray] = []
    heuristic = False
    cache: dict[tuple[int, bytes], tuple] = {}
    for u in range(n):
        g, j = model.locate(u)
        key = (g, profile.strategies[g][j].tobytes())
        if key not in cache:
            x, v = best_response(model, u, profile, driver_profile, config)
            dec = user_flows(model, profile, driver_profile, u)
            f = float(profile.strategies[g][j] @ (edge_costs(model.network, dec.total) @ model.user_mats[g]))
            convex = model.zeta == 1 or convexity_diagnostics(model, u, profile, driver_profile).psd
            cache[key] = (x, v, f, convex)
        x, v, f, convex = cache[key]
        heuristic |= not convex
        values[u], best[u] = f, v
        gaps[u] = max(f - v, 0.0)
        best_x.append(x)
    certified = bool(np.all(gaps <= config.gap_rel_tol * np.maximum(1.0, values)))
    return GapReport(gaps, values, best, tuple(best_x), certified, heuristic, config.gap_rel_tol)
