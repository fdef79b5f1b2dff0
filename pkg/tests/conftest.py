import numpy as np
import pytest

from equiroute import io
from equiroute.behavior import DriverGroup, Profile, UserGroup
from equiroute.network import Edge, Network, Path
from equiroute.scenario import Scenario


def random_profile(groups, rng, interior=True):
    blocks = []
    for g in groups:
        b = rng.dirichlet(np.ones(g.n_paths), size=g.count)
        if interior:
            b = 0.9 * b + 0.1 / g.n_paths
        blocks.append(b)
    return Profile(tuple(blocks))


def diamond(t=(2.0, 3.0, 3.0, 2.0), k=10.0, eta=0.5, zeta=1.0, users=2, drivers=0, horizon=0, timeline=()):
    """Two routes s->a->d and s->b->d; a tiny scenario for unit tests."""
    edges = [Edge("sa", "s", "a", t[0], k), Edge("ad", "a", "d", t[1], k),
             Edge("sb", "s", "b", t[2], k), Edge("bd", "b", "d", t[3], k)]
    net = Network.from_edges(edges, eta, zeta)
    paths = (Path(("sa", "ad")), Path(("sb", "bd")))
    ug = (UserGroup(("s", "d"), paths, users, 1.0),)
    dg = (DriverGroup(("s", "d"), paths, drivers, 0.0, 0.1),) if drivers else ()
    return Scenario(net, ug, dg, tuple(timeline), horizon)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def net1():
    return io.bundled("network1_stable")


@pytest.fixture(scope="session")
def net1_accident():
    return io.bundled("network1_accident")


@pytest.fixture(scope="session")
def net2():
    return io.bundled("network2_stable")


@pytest.fixture(scope="session")
def net2_events():
    return io.bundled("network2_two_events")


_CRITERIA: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA[name] = ("PASS" if report.passed else "FAIL", _CRITERIA.get(name, ("", ""))[1])


def pytest_collection_modifyitems(items):
    for item in items:
        if item.name.startswith("test_criterion_"):
            _CRITERIA[item.name] = ("NOT RUN", (item.function.__doc__ or "").strip())


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        status, doc = _CRITERIA[name]
        terminalreporter.write_line(f"criterion {name.rsplit('_', 1)[-1]}: {status:4s}  {doc}")
