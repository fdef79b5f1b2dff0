import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from equiroute.behavior import (DriverGroup, DriverProfile, Profile, UserGroup, driver_flows, initial_costs,
                                mnl_strategy, project_simplex, project_simplex_rows, validate_group)
from equiroute.cost import CostModel, driver_edge_flows, total_flows
from equiroute.errors import ValidationError
from equiroute.network import Path

vectors = st.integers(1, 7).flatmap(
    lambda k: arrays(np.float64, k, elements=st.floats(-50, 50, allow_nan=False, allow_infinity=False)))


@pytest.mark.parametrize("v, expected", [
    ((0.2, 0.8), (0.2, 0.8)),
    ((2.0, 0.0), (1.0, 0.0)),
    ((0.9, 0.3), (0.8, 0.2)),
    ((5.0,), (1.0,)),
    ((1.0, 1.0, 1.0), (1 / 3, 1 / 3, 1 / 3)),
])
def test_projection_examples(v, expected):
    np.testing.assert_allclose(project_simplex(v), expected, atol=1e-12)


def test_projection_matches_grid_on_segment():
    grid = np.linspace(0, 1, 10001)
    pts = np.stack([grid, 1 - grid], axis=1)
    v = np.array([0.9, 0.3])
    best = pts[np.argmin(((pts - v) ** 2).sum(axis=1))]
    np.testing.assert_allclose(project_simplex(v), best, atol=1e-4)


@settings(max_examples=300, deadline=None)
@given(vectors)
def test_projection_properties(v):
    p = project_simplex(v)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) <= 1e-12 * len(p)
    np.testing.assert_allclose(project_simplex(p), p, atol=1e-12)
    # variational inequality against every vertex
    for w in np.eye(len(v)):
        assert (p - v) @ (p - w) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(vectors)
def test_projection_is_threshold_form(v):
    # KKT: p = max(v - theta, 0) for a single theta
    p = project_simplex(v)
    support = p > 0
    theta = np.mean(v[support] - p[support])
    np.testing.assert_allclose(p[support], v[support] - theta, atol=1e-9)
    assert np.all(v[~support] <= theta + 1e-9)


def test_projection_rows_equal_single():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(50, 4)) * 3
    rows = project_simplex_rows(v)
    for r, x in zip(rows, v):
        np.testing.assert_array_equal(r, project_simplex(x))


@pytest.mark.parametrize("bad", [[np.nan, 1.0], [np.inf, 0.0]])
def test_projection_rejects_non_finite(bad):
    with pytest.raises(ValidationError):
        project_simplex(bad)


def _group(alpha, beta, k):
    return DriverGroup(("a", "b"), tuple(Path((f"e{i}",)) for i in range(k)), 1, alpha, beta)


def test_mnl_example():
    np.testing.assert_allclose(mnl_strategy(_group(0.0, 0.1, 2), [10, 20]), [0.7311, 0.2689], atol=1e-4)


def test_mnl_uniform_cases():
    g = _group(1.3, 0.0, 4)
    assert mnl_strategy(g, [1, 50, 3, 1e6]).tolist() == [0.25] * 4
    g = _group(0.0, 0.7, 3)
    np.testing.assert_allclose(mnl_strategy(g, [9, 9, 9]), [1 / 3] * 3, atol=1e-15)


def test_mnl_is_stable_for_extreme_values():
    p = mnl_strategy(_group(0.0, 10.0, 3), [1e5, 1e5 + 1, 2e5])
    assert np.all(np.isfinite(p))
    assert p[2] == 0.0
    np.testing.assert_allclose(p[0] / p[1], np.exp(10.0))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 2), arrays(np.float64, 3, elements=st.floats(0.1, 100)), st.floats(-50, 50))
def test_mnl_shift_invariance_and_oracle(alpha, beta, costs, shift):
    g = _group(alpha, beta, 3)
    p = mnl_strategy(g, costs)
    assert abs(p.sum() - 1) <= 1e-12
    np.testing.assert_allclose(mnl_strategy(g, costs + shift), p, atol=1e-12)
    mpmath.mp.dps = 40
    w = [mpmath.exp(-alpha - beta * mpmath.mpf(float(c))) for c in costs]
    ref = [float(x / sum(w)) for x in w]
    np.testing.assert_allclose(p, ref, atol=1e-12)


def test_mnl_rejects_shape_mismatch():
    with pytest.raises(ValidationError):
        mnl_strategy(_group(0, 0.1, 2), [1, 2, 3])


def test_initial_costs_free_flow_and_zero_flow(net1):
    net = net1.network
    g = net1.drivers[0]
    ff = initial_costs(net, g)
    t = {e.id: e.free_flow_time for e in net.edges}
    assert ff.tolist() == [sum(t[e] for e in p.edge_ids) for p in g.paths]
    model = CostModel.build(net, net1.users, net1.drivers)
    zero_u = Profile(tuple(np.zeros((grp.count, grp.n_paths)) for grp in net1.users))
    zero_d = DriverProfile(tuple(np.zeros(grp.n_paths) for grp in net1.drivers))
    np.testing.assert_allclose(initial_costs(net, g, "at_profile", zero_u, zero_d, model), ff)


def test_initial_costs_at_profile_matches_edge_by_edge(net1):
    net = net1.network
    model = net1.model
    drivers = net1.driver_profile()
    profile = Profile.uniform(net1.users)
    flows = total_flows(model, profile, drivers)
    by_id = dict(zip(net.edge_ids, flows))
    eta, zeta = net.bpr_eta, net.bpr_zeta
    for g in net1.drivers:
        got = initial_costs(net, g, "at_profile", profile, drivers, model)
        for c, p in zip(got, g.paths):
            e = [net.edge(i) for i in p.edge_ids]
            hand = sum(x.free_flow_time * (1 + eta * (by_id[x.id] / x.capacity) ** zeta) for x in e)
            assert c == pytest.approx(hand, rel=1e-12)


def test_driver_flows_double_loop(net1):
    net = net1.network
    dp = net1.driver_profile()
    got = driver_flows(net, net1.drivers, dp)
    ref = np.zeros(len(net.edges))
    for g, p in zip(net1.drivers, dp.strategies):
        for _ in range(g.count):
            for prob, path in zip(p, g.paths):
                for e in path.edge_ids:
                    ref[net.index_of(e)] += prob
    np.testing.assert_allclose(got, ref, atol=1e-12)
    np.testing.assert_allclose(driver_edge_flows(net1.model, dp), ref, atol=1e-12)


def test_driver_flows_linear(net1, rng):
    net = net1.network
    p1 = DriverProfile(tuple(rng.dirichlet(np.ones(g.n_paths)) for g in net1.drivers))
    p2 = DriverProfile(tuple(rng.dirichlet(np.ones(g.n_paths)) for g in net1.drivers))
    lam = 0.3
    mix = DriverProfile(tuple(lam * a + (1 - lam) * b for a, b in zip(p1.strategies, p2.strategies)))
    np.testing.assert_allclose(driver_flows(net, net1.drivers, mix),
                               lam * driver_flows(net, net1.drivers, p1)
                               + (1 - lam) * driver_flows(net, net1.drivers, p2), atol=1e-12)


def test_uniform_drivers_on_disjoint_paths():
    from conftest import diamond

    s = diamond(users=1, drivers=25)
    f = driver_edge_flows(s.model, DriverProfile((np.array([0.5, 0.5]),)))
    assert f.tolist() == [12.5] * 4


def test_profile_layout_and_updates(net1):
    p = Profile.uniform(net1.users)
    assert p.n_users == 60
    assert [b.shape for b in p.strategies] == [(30, 3), (20, 3), (10, 4)]
    assert p.locate(31) == (1, 1)
    q = p.with_strategy(31, np.array([1.0, 0.0, 0.0]))
    assert q.strategy(31).tolist() == [1.0, 0.0, 0.0]
    assert p.strategy(31).tolist() == pytest.approx([1 / 3] * 3)
    assert q.max_abs_diff(p) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        p.strategies[0][0, 0] = 1.0


def test_profile_check_rejects_bad_shapes(net1):
    p = Profile.uniform(net1.users[:2])
    with pytest.raises(ValidationError):
        p.check(net1.users)
    with pytest.raises(ValidationError):
        Profile((np.array([[0.7, 0.7]]),)).check()


def test_validate_group_messages(net1):
    net = net1.network
    g = UserGroup(("1", "7"), (Path(("1-2", "2-7")), Path(("1-2", "5-6"))), 0, 1.5)
    problems = validate_group(net, g, "users[0]")
    assert any("paths[1]" in p for p in problems)
    assert any("count" in p for p in problems)
    assert any("pi" in p for p in problems)
