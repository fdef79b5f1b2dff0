"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid scenario or profile,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .baselines import evaluate
from .behavior import Profile
from .cost import convexity_diagnostics
from .errors import NumericalError, ValidationError
from .network import incidence, overlap_condition
from .simulation import METHOD_TITLES, STATIC_METHODS, compare, run
from .solver import SolverConfig, StepSchedule, deviation_gap

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _non_negative_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="equiroute", description="Mixed-strategy route recommendation in congested networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, with_seed=True):
        sp.add_argument("scenario", help="scenario JSON file or a bundled scenario name")
        sp.add_argument("--tol", type=float, help="residual tolerance for stabilization")
        sp.add_argument("--alpha", type=float, help="constant step size")
        sp.add_argument("--max-steps", type=int, dest="max_steps", help="step cap for static equilibrium planning")
        sp.add_argument("--horizon", type=_non_negative_int, help="number of dynamic steps")
        if with_seed:
            sp.add_argument("--seed", type=int, help="seed for the random update scheme")

    v = sub.add_parser("validate", help="check a scenario and print convexity diagnostics")
    v.add_argument("scenario")

    s = sub.add_parser("solve", help="run the parallel (PU) or random (RU) update scheme")
    common(s)
    s.add_argument("--scheme", choices=("parallel", "random"), default="parallel")
    s.add_argument("--out", help="directory for trajectory, summary and final profile")

    b = sub.add_parser("baseline", help="plan and evaluate one static method")
    common(b, with_seed=False)
    b.add_argument("--method", choices=STATIC_METHODS, required=True)
    b.add_argument("--out", help="directory for the summary CSV")

    c = sub.add_parser("compare", help="six-method comparison table")
    common(c)
    c.add_argument("--out", help="directory for summary.csv and summary.txt")
    c.add_argument("--threads", type=int, help="worker threads (default EQUIROUTE_THREADS or CPU count)")

    cf = sub.add_parser("certify", help="deviation-gap certificate for a stored profile")
    common(cf, with_seed=False)
    cf.add_argument("--profile", required=True, help="profile JSON written by `solve --out`")
    return p


def _configure(args):
    scenario = io.load_scenario(args.scenario)
    cfg = scenario.solver or SolverConfig()
    if getattr(args, "alpha", None) is not None:
        cfg = replace(cfg, schedule=StepSchedule.constant(args.alpha, cfg.schedule.reset_on_event))
    for key in ("tol", "max_steps", "seed"):
        if getattr(args, key, None) is not None:
            cfg = replace(cfg, **{key: getattr(args, key)})
    if getattr(args, "horizon", None) is not None:
        scenario = replace(scenario, horizon=args.horizon).check()
    return scenario, cfg


def _print_reports(method: str, reports: dict, ods) -> None:
    for phase, rep in reports.items():
        print(f"{METHOD_TITLES.get(method, method)} [{phase}]")
        for od in ods:
            print(f"  {od:8s} {rep.per_od[od]:10.3f}")
        print(f"  {'Total':8s} {rep.total:10.3f}")


def cmd_validate(args) -> int:
    try:
        scenario = io.load_scenario(args.scenario)
    except ValidationError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    net = scenario.network
    print(f"network: {len(net.nodes)} nodes, {len(net.edges)} edges, eta={net.bpr_eta:g}, zeta={net.bpr_zeta:g}")
    print(f"users: {scenario.model.n_users} in {len(scenario.users)} groups; "
          f"drivers: {sum(g.count for g in scenario.drivers)} in {len(scenario.drivers)} groups")
    inc = incidence(net, [p for g in scenario.users for p in g.paths])
    cols, start = [], 0
    for g in scenario.users:
        cols.append(range(start, start + g.n_paths))
        start += g.n_paths
    overlap = overlap_condition(inc, cols)
    profile = Profile.uniform(scenario.users)
    drivers = scenario.driver_profile(net)
    first = 0
    print("group  od        paths  overlap_ok  diag_dominant  psd    min_eig")
    for i, g in enumerate(scenario.users):
        rep = convexity_diagnostics(scenario.model, first, profile, drivers)
        print(f"{i:<6d} {g.od_label:9s} {g.n_paths:<6d} {str(overlap.ok[i]):11s} "
              f"{str(rep.diag_dominant):14s} {str(rep.psd):6s} {rep.min_eigenvalue:.3e}")
        first += g.count
    for _, edge_id, count in overlap.violations:
        print(f"  overlap violation: edge {edge_id} is on {count} paths of one group")
    print("valid")
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario, cfg = _configure(args)
    cfg = replace(cfg, scheme=args.scheme)
    method = "pu" if args.scheme == "parallel" else "ru"
    result = run(scenario, method, cfg)
    _print_reports(method, result.phase_reports, scenario.od_labels())
    for phase, idx in result.stabilization.items():
        print(f"stabilized [{phase}]: {'not reached' if idx is None else f'step {idx}'}")
    if args.out:
        io.write_run(result, args.out)
        io.save_profile(result.trajectory.final, Path(args.out) / f"{method}_profile.json")
    return EXIT_OK


def cmd_baseline(args) -> int:
    scenario, cfg = _configure(args)
    result = run(scenario, args.method, cfg)
    _print_reports(args.method, result.phase_reports, scenario.od_labels())
    if args.out:
        dest = Path(args.out)
        dest.mkdir(parents=True, exist_ok=True)
        io.write_summary(args.method, result.phase_reports, result.scenario.od_labels(),
                         dest / f"{args.method}_summary.csv")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario, cfg = _configure(args)
    table = compare(scenario, cfg, threads=args.threads)
    print(io.render_comparison(table), end="")
    for phase, method, od in table.paradoxes():
        print(f"paradox [{phase}]: {METHOD_TITLES[method]} beats PU on OD {od} but has a higher total")
    if args.out:
        io.write_comparison(table, args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    scenario, cfg = _configure(args)
    profile = io.load_profile(args.profile, scenario)
    drivers = scenario.driver_profile(scenario.network)
    rep = deviation_gap(scenario.model, profile, drivers, cfg)
    rep_costs = evaluate(profile, scenario, driver_profile=drivers)
    worst = int(np.argmax(rep.gaps / np.maximum(1.0, rep.values))) if rep.gaps.size else 0
    print(f"total cost: {rep_costs.total:.6g}")
    print(f"max deviation gap: {rep.max_gap:.3e} (relative {rep.max_relative_gap:.3e}, worst user {worst})")
    print(f"certified: {'yes' if rep.certified else 'no'} (tolerance {rep.rel_tol:g} relative)"
          + (" [heuristic: non-convex costs]" if rep.heuristic else ""))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "baseline": cmd_baseline,
            "compare": cmd_compare, "certify": cmd_certify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
