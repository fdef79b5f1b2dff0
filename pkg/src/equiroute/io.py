"""Scenario files (JSON), profile files and the CSV outputs.

CSV numbers use 6 significant digits, '.' decimals and '\\n' line endings so
that identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path as FsPath
from typing import Any, Iterable

import numpy as np

from .behavior import DriverGroup, Profile, UserGroup
from .errors import ScenarioParseError, ValidationError
from .network import Edge, Network, Path
from .scenario import Event, Scenario
from .solver import SolverConfig, StepSchedule

BUNDLED = ("network1_stable", "network1_accident", "network2_stable", "network2_two_events")

TOP_KEYS = {"name", "notes", "network", "bpr", "users", "drivers", "driver_cost_mode", "driver_reeval",
            "selfish_graph_wide", "timeline", "horizon", "solver"}
REQUIRED_TOP = ("network", "bpr", "users")
SOLVER_KEYS = {"scheme", "alpha", "reset_on_event", "tol", "window", "max_steps", "seed"}

TRAJECTORY_HEADER = ("step", "user_index", "od", "path_index", "probability", "expected_cost")
SUMMARY_HEADER = ("method", "phase", "od", "cost")


def num(x: float) -> str:
    return f"{x:.6g}"


# -- parsing -----------------------------------------------------------------

def _obj(v, where: str, allowed: set[str], required: Iterable[str] = ()) -> dict:
    if not isinstance(v, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = sorted(set(v) - allowed)
    if unknown:
        raise ValidationError(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}")
    for key in required:
        if key not in v:
            raise ValidationError(f"{where}: missing required key {key!r}")
    return v


def _list(v, where: str) -> list:
    if not isinstance(v, list):
        raise ValidationError(f"{where}: expected a list")
    return v


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{where}: expected an integer, got {v!r}")
    return v


def _name(v, where: str) -> str:
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise ValidationError(f"{where}: expected a string or integer id, got {v!r}")
    return str(v)


def _od(v, where: str) -> tuple[str, str]:
    v = _list(v, where)
    if len(v) != 2:
        raise ValidationError(f"{where}: expected [origin, destination]")
    return _name(v[0], f"{where}[0]"), _name(v[1], f"{where}[1]")


def _paths(v, where: str, network: Network) -> tuple[Path, ...]:
    out = []
    for i, p in enumerate(_list(v, where)):
        ids = tuple(_name(e, f"{where}[{i}][{j}]") for j, e in enumerate(_list(p, f"{where}[{i}]")))
        for j, eid in enumerate(ids):
            if eid not in network.edge_ids:
                raise ValidationError(f"{where}[{i}][{j}]: path references unknown edge {eid!r}")
        out.append(Path(ids))
    return tuple(out)


def _network(doc: dict) -> Network:
    net = _obj(doc["network"], "network", {"nodes", "edges"}, ("edges",))
    bpr = _obj(doc["bpr"], "bpr", {"eta", "zeta"}, ("eta", "zeta"))
    edges = []
    for i, e in enumerate(_list(net["edges"], "network.edges")):
        w = f"network.edges[{i}]"
        e = _obj(e, w, {"id", "tail", "head", "t", "k"}, ("id", "tail", "head", "t", "k"))
        edges.append(Edge(_name(e["id"], f"{w}.id"), _name(e["tail"], f"{w}.tail"), _name(e["head"], f"{w}.head"),
                          _number(e["t"], f"{w}.t"), _number(e["k"], f"{w}.k")))
    nodes = None
    if "nodes" in net:
        nodes = [_name(n, f"network.nodes[{i}]") for i, n in enumerate(_list(net["nodes"], "network.nodes"))]
    return Network.from_edges(edges, _number(bpr["eta"], "bpr.eta"), _number(bpr["zeta"], "bpr.zeta"), nodes)


def _solver(v) -> SolverConfig:
    v = _obj(v, "solver", SOLVER_KEYS)
    reset = v.get("reset_on_event", True)
    if not isinstance(reset, bool):
        raise ValidationError("solver.reset_on_event: expected true/false")
    alpha = v.get("alpha", 0.01)
    if isinstance(alpha, dict):
        h = _obj(alpha, "solver.alpha", {"c", "n0"}, ("c",))
        schedule = StepSchedule.harmonic(_number(h["c"], "solver.alpha.c"),
                                         _number(h.get("n0", 1.0), "solver.alpha.n0"), reset)
    else:
        schedule = StepSchedule.constant(_number(alpha, "solver.alpha"), reset)
    kw = {}
    if "tol" in v:
        kw["tol"] = _number(v["tol"], "solver.tol")
    for key in ("window", "max_steps", "seed"):
        if key in v:
            kw[key] = _int(v[key], f"solver.{key}")
    if "scheme" in v:
        kw["scheme"] = v["scheme"]
    return SolverConfig(schedule, **kw)


def scenario_from_dict(doc: Any) -> Scenario:
    """Build and fully validate a scenario from decoded JSON."""
    doc = _obj(doc, "scenario", TOP_KEYS, REQUIRED_TOP)
    network = _network(doc)
    users = []
    for i, g in enumerate(_list(doc["users"], "users")):
        w = f"users[{i}]"
        g = _obj(g, w, {"od", "paths", "count", "pi"}, ("od", "paths", "count"))
        pi = _number(g.get("pi", 1.0), f"{w}.pi")
        if not 0 < pi <= 1:
            raise ValidationError(f"{w}.pi: must be in (0, 1], got {pi}")
        users.append(UserGroup(_od(g["od"], f"{w}.od"), _paths(g["paths"], f"{w}.paths", network),
                               _int(g["count"], f"{w}.count"), pi))
    drivers = []
    for i, g in enumerate(_list(doc.get("drivers", []), "drivers")):
        w = f"drivers[{i}]"
        g = _obj(g, w, {"od", "paths", "count", "alpha", "beta"}, ("od", "paths", "count"))
        drivers.append(DriverGroup(_od(g["od"], f"{w}.od"), _paths(g["paths"], f"{w}.paths", network),
                                   _int(g["count"], f"{w}.count"),
                                   _number(g.get("alpha", 0.0), f"{w}.alpha"),
                                   _number(g.get("beta", 0.1), f"{w}.beta")))
    events = []
    for i, ev in enumerate(_list(doc.get("timeline", []), "timeline")):
        w = f"timeline[{i}]"
        ev = _obj(ev, w, {"step", "edge", "set_t", "scale_t"}, ("step", "edge"))
        try:
            events.append(Event(_int(ev["step"], f"{w}.step"), _name(ev["edge"], f"{w}.edge"),
                                _number(ev["set_t"], f"{w}.set_t") if "set_t" in ev else None,
                                _number(ev["scale_t"], f"{w}.scale_t") if "scale_t" in ev else None))
        except ValidationError as exc:
            raise ValidationError(f"{w}: {exc}") from None
    graph_wide = doc.get("selfish_graph_wide", False)
    if not isinstance(graph_wide, bool):
        raise ValidationError("selfish_graph_wide: expected true/false")
    for key in ("name", "notes", "driver_cost_mode", "driver_reeval"):
        if key in doc and not isinstance(doc[key], str):
            raise ValidationError(f"{key}: expected a string")
    scenario = Scenario(
        network, tuple(users), tuple(drivers), tuple(events),
        horizon=_int(doc.get("horizon", 0), "horizon"),
        driver_cost_mode=doc.get("driver_cost_mode", "free_flow"),
        driver_reeval=doc.get("driver_reeval", "never"),
        solver=_solver(doc["solver"]) if "solver" in doc else None,
        selfish_graph_wide=graph_wide,
        name=doc.get("name", ""),
        notes=doc.get("notes", ""),
    )
    return scenario.check()


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def load_scenario(path: str | FsPath) -> Scenario:
    """Read a scenario file; a bare bundled name such as ``network1_stable`` also works."""
    p = FsPath(path)
    if not p.exists() and str(path) in BUNDLED:
        return bundled(str(path))
    return parse_scenario(p.read_text(encoding="utf-8"), str(p))


def bundled(name: str) -> Scenario:
    if name not in BUNDLED:
        raise ValidationError(f"no bundled scenario {name!r}; available: {', '.join(BUNDLED)}")
    text = resources.files("equiroute").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return parse_scenario(text, f"{name}.json")


# -- serialization -------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {}
    if s.name:
        doc["name"] = s.name
    if s.notes:
        doc["notes"] = s.notes
    doc["network"] = {
        "nodes": sorted(s.network.nodes, key=_node_key),
        "edges": [{"id": e.id, "tail": e.tail, "head": e.head, "t": e.free_flow_time, "k": e.capacity}
                  for e in s.network.edges],
    }
    doc["bpr"] = {"eta": s.network.bpr_eta, "zeta": s.network.bpr_zeta}
    doc["users"] = [{"od": list(g.od), "paths": [list(p.edge_ids) for p in g.paths], "count": g.count,
                     "pi": g.update_prob} for g in s.users]
    doc["drivers"] = [{"od": list(g.od), "paths": [list(p.edge_ids) for p in g.paths], "count": g.count,
                       "alpha": g.alpha, "beta": g.beta} for g in s.drivers]
    doc["driver_cost_mode"] = s.driver_cost_mode
    doc["driver_reeval"] = s.driver_reeval
    doc["selfish_graph_wide"] = s.selfish_graph_wide
    doc["timeline"] = [{"step": ev.step, "edge": ev.edge,
                        **({"set_t": ev.set_t} if ev.set_t is not None else {"scale_t": ev.scale_t})}
                       for ev in s.timeline]
    doc["horizon"] = s.horizon
    if s.solver is not None:
        c = s.solver
        sch = c.schedule
        alpha: Any = sch.alpha if sch.kind == "constant" else {"c": sch.c, "n0": sch.n0}
        doc["solver"] = {"scheme": c.scheme, "alpha": alpha, "reset_on_event": sch.reset_on_event,
                         "tol": c.tol, "window": c.window, "max_steps": c.max_steps, "seed": c.seed}
    return doc


def _node_key(n: str):
    return (0, int(n), n) if n.isdigit() else (1, 0, n)


def dump_scenario(s: Scenario) -> str:
    """JSON text with one line per edge, group and event."""
    doc = scenario_to_dict(s)
    lines = ["{"]
    items = list(doc.items())
    for i, (key, value) in enumerate(items):
        end = "," if i < len(items) - 1 else ""
        if key == "network":
            edges = ",\n".join("      " + json.dumps(e) for e in value["edges"])
            lines.append(f'  "network": {{\n    "nodes": {json.dumps(value["nodes"])},\n'
                         f'    "edges": [\n{edges}\n    ]\n  }}{end}')
        elif isinstance(value, list) and value:
            body = ",\n".join("    " + json.dumps(v) for v in value)
            lines.append(f"  {json.dumps(key)}: [\n{body}\n  ]{end}")
        else:
            lines.append(f"  {json.dumps(key)}: {json.dumps(value)}{end}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_profile(profile: Profile, path: str | FsPath) -> None:
    doc = {"strategies": [b.tolist() for b in profile.strategies]}
    FsPath(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_profile(path: str | FsPath, scenario: Scenario | None = None) -> Profile:
    try:
        doc = json.loads(FsPath(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    doc = _obj(doc, "profile", {"strategies"}, ("strategies",))
    blocks = []
    for g, b in enumerate(_list(doc["strategies"], "strategies")):
        rows = [_list(r, f"strategies[{g}][{i}]") for i, r in enumerate(_list(b, f"strategies[{g}]"))]
        blocks.append(np.array([[_number(x, f"strategies[{g}][{i}][{j}]") for j, x in enumerate(r)]
                                for i, r in enumerate(rows)], dtype=float))
    try:
        profile = Profile(tuple(blocks))
    except ValueError as exc:
        raise ValidationError(f"profile: ragged strategy block ({exc})") from None
    profile.check(scenario.users if scenario is not None else None)
    return profile


# -- CSV outputs -----------------------------------------------------------------

def _write_rows(path: FsPath, header: tuple[str, ...], rows: Iterable[Iterable[str]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(r) for r in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def trajectory_rows(result) -> Iterable[tuple[str, ...]]:
    labels = result.scenario.user_labels()
    for n, (profile, costs) in enumerate(zip(result.trajectory.profiles, result.trajectory.costs)):
        u = 0
        for block in profile.strategies:
            for row in block:
                for i, p in enumerate(row):
                    yield str(n), str(u), labels[u], str(i), num(p), num(costs[u])
                u += 1


def summary_rows(method: str, reports: dict, ods: Iterable[str]) -> list[tuple[str, ...]]:
    rows = []
    ods = list(ods)
    for phase, rep in reports.items():
        rows.extend((method, phase, od, num(rep.per_od[od])) for od in ods)
        rows.append((method, phase, "total", num(rep.total)))
    return rows


def write_summary(method: str, reports: dict, ods: Iterable[str], path: str | FsPath) -> FsPath:
    path = FsPath(path)
    _write_rows(path, SUMMARY_HEADER, summary_rows(method, reports, ods))
    return path


def write_run(result, destination: str | FsPath) -> tuple[FsPath, FsPath]:
    """Write ``<method>_trajectory.csv`` and ``<method>_summary.csv`` into a directory."""
    dest = FsPath(destination)
    dest.mkdir(parents=True, exist_ok=True)
    traj_path = dest / f"{result.method}_trajectory.csv"
    summ_path = dest / f"{result.method}_summary.csv"
    _write_rows(traj_path, TRAJECTORY_HEADER, trajectory_rows(result))
    write_summary(result.method, result.phase_reports, result.scenario.od_labels(), summ_path)
    return traj_path, summ_path


def comparison_rows(table) -> list[tuple[str, ...]]:
    rows = []
    for m in table.methods:
        rows.extend(summary_rows(m, {ph.label: table.cells[(ph.label, m)] for ph in table.phases}, table.ods))
    return rows


def render_comparison(table) -> str:
    """Aligned text: one block per phase, rows OD pairs plus Total, one column per method."""
    from .simulation import METHOD_TITLES

    out = []
    titles = [METHOD_TITLES.get(m, m) for m in table.methods]
    width = max(9, *(len(t) + 1 for t in titles))
    for ph in table.phases:
        out.append(f"[{ph.label}] step {ph.step}")
        out.append("OD".ljust(8) + "".join(t.rjust(width) for t in titles))
        for od in list(table.ods) + ["Total"]:
            cells = [table.cost(ph.label, m, None if od == "Total" else od) for m in table.methods]
            out.append(od.ljust(8) + "".join(f"{c:.2f}".rjust(width) for c in cells))
        out.append("")
    return "\n".join(out)


def write_comparison(table, destination: str | FsPath) -> tuple[FsPath, FsPath]:
    """Write ``summary.csv`` and the aligned ``summary.txt`` into a directory."""
    dest = FsPath(destination)
    dest.mkdir(parents=True, exist_ok=True)
    csv_path = dest / "summary.csv"
    txt_path = dest / "summary.txt"
    _write_rows(csv_path, SUMMARY_HEADER, comparison_rows(table))
    with open(txt_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_comparison(table))
    return csv_path, txt_path
