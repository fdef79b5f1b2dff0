import csv
import json

import numpy as np
import pytest

from conftest import diamond, random_profile
from equiroute import io
from equiroute.errors import ScenarioParseError, ValidationError
from equiroute.simulation import RunResult, compare, run
from equiroute.solver import Trajectory


def _doc(name="network1_stable"):
    return json.loads(io.dump_scenario(io.bundled(name)))


@pytest.mark.parametrize("name", io.BUNDLED)
def test_bundled_scenarios_round_trip(name):
    s = io.bundled(name)
    again = io.parse_scenario(io.dump_scenario(s))
    assert again.network == s.network
    assert again.users == s.users
    assert again.drivers == s.drivers
    assert again.timeline == s.timeline
    assert again.horizon == s.horizon
    assert again.solver == s.solver
    assert io.dump_scenario(again) == io.dump_scenario(s)


def test_network1_populations(net1):
    assert [g.count for g in net1.users] == [30, 20, 10]
    assert [g.count for g in net1.drivers] == [25, 25]
    assert [g.od_label for g in net1.users] == ["1-7", "3-9", "1-9"]


def test_unknown_keys_rejected():
    doc = _doc()
    doc["horizn"] = 5
    with pytest.raises(ValidationError, match="horizn"):
        io.scenario_from_dict(doc)
    doc = _doc()
    doc["users"][1]["weight"] = 2
    with pytest.raises(ValidationError, match=r"users\[1\]"):
        io.scenario_from_dict(doc)


def test_missing_required_section():
    doc = _doc()
    del doc["bpr"]
    with pytest.raises(ValidationError, match="bpr"):
        io.scenario_from_dict(doc)


def test_probability_out_of_range():
    doc = _doc()
    doc["users"][0]["pi"] = 1.5
    with pytest.raises(ValidationError, match=r"users\[0\]\.pi"):
        io.scenario_from_dict(doc)


def test_path_with_unknown_edge_names_path_and_edge():
    doc = _doc()
    doc["users"][2]["paths"][1] = ["1-2", "2-99"]
    with pytest.raises(ValidationError) as err:
        io.scenario_from_dict(doc)
    assert "users[2].paths[1]" in str(err.value)
    assert "2-99" in str(err.value)


def test_disconnected_path_rejected():
    doc = _doc()
    doc["users"][0]["paths"][0] = ["1-2", "5-6", "6-7"]
    with pytest.raises(ValidationError, match=r"users\[0\]"):
        io.scenario_from_dict(doc)


def test_syntax_error_reports_location():
    with pytest.raises(ScenarioParseError) as err:
        io.parse_scenario('{\n  "network": [,]\n}', "bad.json")
    assert str(err.value).startswith("bad.json:2:")


def test_load_scenario_accepts_path_or_bundled_name(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(io.dump_scenario(io.bundled("network1_accident")))
    assert io.load_scenario(p).timeline == io.load_scenario("network1_accident").timeline
    with pytest.raises(OSError):
        io.load_scenario(tmp_path / "missing.json")


def test_profile_round_trip(tmp_path, net1):
    p = random_profile(net1.users, np.random.default_rng(3))
    io.save_profile(p, tmp_path / "p.json")
    q = io.load_profile(tmp_path / "p.json", net1)
    assert q.max_abs_diff(p) == 0.0
    with pytest.raises(ValidationError):
        io.load_profile(tmp_path / "p.json", io.bundled("network2_stable"))


def test_empty_trajectory_writes_headers_only(tmp_path):
    s = diamond()
    res = RunResult("pu", s, Trajectory(), {}, {})
    traj, summ = io.write_run(res, tmp_path)
    assert traj.read_text() == ",".join(io.TRAJECTORY_HEADER) + "\n"
    assert summ.read_text() == ",".join(io.SUMMARY_HEADER) + "\n"


def test_trajectory_csv_layout(tmp_path):
    s = diamond(users=2, horizon=3)
    traj, _ = io.write_run(run(s, "pu"), tmp_path)
    rows = list(csv.reader(traj.open(newline="")))
    assert tuple(rows[0]) == io.TRAJECTORY_HEADER
    assert len(rows) == 1 + 4 * 2 * 2
    assert rows[1][:4] == ["0", "0", "s-d", "0"]
    assert b"\r" not in traj.read_bytes()


def test_number_format():
    assert io.num(2022.4999999) == "2022.5"
    assert io.num(1 / 3) == "0.333333"
    assert io.num(0.0) == "0"


def test_reruns_are_byte_identical(tmp_path, net1_accident):
    for d in ("a", "b"):
        io.write_run(run(net1_accident, "ru"), tmp_path / d)
    for f in ("ru_trajectory.csv", "ru_summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_summary_total_matches_weighted_od_rows(tmp_path, net1):
    table = compare(net1)
    csv_path, txt_path = io.write_comparison(table, tmp_path)
    rows = list(csv.DictReader(csv_path.open(newline="")))
    assert {r["method"] for r in rows} == {"selfish", "uniform", "misinformed", "wu", "pu", "ru"}
    counts = {"1-7": 30, "3-9": 20, "1-9": 10}
    for method in table.methods:
        mine = {r["od"]: float(r["cost"]) for r in rows if r["method"] == method and r["phase"] == "final"}
        assert abs(sum(counts[od] * mine[od] for od in counts) - mine["total"]) <= 0.05
    text = txt_path.read_text()
    assert "w/o MNL" in text and "Total" in text
