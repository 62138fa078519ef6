"""Command-line front end.

    trstl list
    trstl nodes SCENARIO
    trstl synth SCENARIO [SCENARIO ...] [--mode max|feas] [--theta-star N | --theta-target N]
                [--horizon H] [--side right|left] [--solver cbc|highs|CONFIG.yaml]
                [--time-limit S] [--warm-start] [--emit-lp PATH] [--out-dir DIR] [--node K ...] [--jobs N]
    trstl monitor SCENARIO [--trace CSV] [--node K ...] [--side right|left] [--out-dir DIR]

Exit codes: 0 certificate ok, 2 bad input, 3 infeasible, 4 timeout,
5 certificate mismatch, 6 solver error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .encoder import EncodingError
from .milp import SolverConfig, SolverError
from .monitor import read_trajectory_csv, robustness_profile, write_trajectory_csv
from .scenario import Scenario, ScenarioError, bundled_scenarios, load_scenario
from .stl import FormulaError, HorizonError, Trajectory, format_formula, formula_horizon, walk
from .synthesis import SynthesisError, SynthesisResult, build_model, synthesize

log = logging.getLogger("trstl")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_TIMEOUT, EXIT_MISMATCH, EXIT_SOLVER = 0, 2, 3, 4, 5, 6
_INPUT_ERRORS = (ScenarioError, FormulaError, HorizonError, EncodingError, OSError, yaml.YAMLError,
                 ValueError)


def subformulas(phi):
    """Preorder list of nodes; index 0 is the whole formula."""
    return list(walk(phi))


def _solver_config(arg: str | None, scenario: Scenario, time_limit: float | None) -> SolverConfig:
    if arg is None:
        return scenario.solver_config(time_limit=time_limit)
    if arg in ("cbc", "highs"):
        extra = {k: v for k, v in scenario.solver.items() if k != "name"}
        if time_limit is not None:
            extra["time_limit"] = time_limit
        return SolverConfig.named(arg, **extra)
    data = yaml.safe_load(Path(arg).read_text())
    if time_limit is not None:
        data["time_limit"] = time_limit
    return SolverConfig.from_dict(data)


def _plan_pairs(scenario: Scenario) -> list[tuple[str, str]]:
    pairs = []
    for m in re.finditer(r"\bin\(\s*\w+\s*,\s*(\w+)\s*,\s*(\w+)\s*\)", scenario.formula):
        if m.groups() not in pairs:
            pairs.append(m.groups())
    return pairs


def _write_profiles(out: Path, phi, traj: Trajectory, side: str, nodes: list[int], names) -> dict[str, list[int]]:
    subs = subformulas(phi)
    profiles = {}
    for k in nodes:
        if not 0 <= k < len(subs):
            raise ScenarioError(f"node {k} out of range; the formula has {len(subs)} nodes")
        table = robustness_profile(subs[k], traj, side)
        table.write_csv(out / f"robustness_{k}.csv")
        profiles[f"node {k}"] = list(table.values)
    return profiles


def _write_plot_data(path: Path, traj: Trajectory, inputs: np.ndarray | None,
                     profiles: dict[str, list[int]]) -> None:
    names = list(traj.names or [f"x{i}" for i in range(traj.dim)])
    m = 0 if inputs is None else inputs.shape[1]
    header = ["t", *names, *(f"u{j}" for j in range(m)),
              *(f"theta_{label.split()[-1]}" for label in profiles)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(traj.horizon + 1):
            row = [t, *(repr(float(v)) for v in traj.states[t])]
            row += [repr(float(inputs[t, j])) if t < len(inputs) else "" for j in range(m)] if m else []
            row += [vals[t] if t < len(vals) else "" for vals in profiles.values()]
            w.writerow(row)


def _exit_code(result: SynthesisResult) -> int:
    if result.certificate_ok:
        return EXIT_OK
    if result.theta_milp is not None and result.theta_milp != result.theta_monitor:
        return EXIT_MISMATCH
    return {"infeasible": EXIT_INFEASIBLE, "timeout": EXIT_TIMEOUT}.get(result.status, EXIT_SOLVER)


def _report(scenario: Scenario, problem, result: SynthesisResult | None, status: str) -> str:
    mode = (f"max (theta_star={problem.theta_star}{', warm start' if problem.warm_start else ''})"
            if problem.mode == "max"
            else f"feas (theta_target={problem.theta_target})")
    lines = [f"scenario: {scenario.name}", f"mode: {mode}", f"side: {problem.side}",
             f"horizon: {problem.horizon}", f"status: {status}"]
    if result is not None:
        lines += [f"theta: {'' if result.theta_monitor is None else result.theta_monitor}",
                  f"theta_milp: {'' if result.theta_milp is None else result.theta_milp}",
                  f"certificate: {'ok' if result.certificate_ok else 'failed'}"]
        expected = scenario.expected.get("theta")
        if expected is not None and problem.mode == scenario.mode and problem.horizon == scenario.horizon:
            verdict = "match" if result.theta_monitor == expected else "MISMATCH"
            lines.append(f"expected_theta: {expected} ({verdict})")
        for key, value in result.counts.items():
            lines.append(f"{key}: {value}")
        lines += [f"build_time_s: {result.build_time:.3f}", f"solve_time_s: {result.solve_time:.3f}"]
        if result.max_state_deviation is not None:
            lines.append(f"max_state_deviation: {result.max_state_deviation:.3g}")
    return "\n".join(lines) + "\n"


def run_synth(args: argparse.Namespace, scenario_arg: str, out: Path) -> int:
    try:
        scenario = load_scenario(scenario_arg)
        solver = _solver_config(args.solver, scenario, args.time_limit)
        problem = scenario.problem(solver, mode=args.mode, theta_star=args.theta_star,
                                   theta_target=args.theta_target, horizon=args.horizon, side=args.side,
                                   warm_start=args.warm_start)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out.mkdir(parents=True, exist_ok=True)
    if args.emit_lp:
        model = build_model(problem)[0]
        Path(args.emit_lp).write_text(model.write_lp())
    if args.keep_solver_files:
        problem.solver.keep_dir = args.keep_solver_files
    try:
        result = synthesize(problem, raise_on_mismatch=False)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        (out / "report.txt").write_text(_report(scenario, problem, None, "error"))
        return EXIT_SOLVER
    except SynthesisError as exc:
        # the re-simulated trajectory left the state box
        print(f"error: {exc}", file=sys.stderr)
        (out / "report.txt").write_text(_report(scenario, problem, None, "simulation-error"))
        return EXIT_MISMATCH
    (out / "report.txt").write_text(_report(scenario, problem, result, result.status))
    if args.debug_csv:
        result.encoder.write_debug_csv(out / "encoding.csv", scenario.variables)
    if result.trajectory is not None:
        traj = result.trajectory
        write_trajectory_csv(traj, out / "trajectory.csv")
        with open(out / "inputs.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"u{j}" for j in range(result.inputs.shape[1])])
            w.writerows([[repr(float(v)) for v in row] for row in result.inputs])
        profiles = _write_profiles(out, problem.formula, traj, problem.side, args.node or [0],
                                   scenario.variables)
        _write_plot_data(out / "plot_data.csv", traj, result.inputs, profiles)
        if not args.no_plot:
            from .plotting import plot_run
            plot_run(out / "figure.png", traj, profiles, result.inputs,
                     title=f"{scenario.name}: theta = {result.theta_monitor}",
                     plan=_plan_pairs(scenario), regions=scenario.regions)
    print((out / "report.txt").read_text(), end="")
    return _exit_code(result)


def _synth_worker(payload) -> tuple[str, int]:
    args, scenario_arg, out = payload
    return scenario_arg, run_synth(args, scenario_arg, out)


def cmd_synth(args: argparse.Namespace) -> int:
    base = Path(args.out_dir)
    if len(args.scenario) == 1:
        return run_synth(args, args.scenario[0], base)
    if args.emit_lp:
        print("error: --emit-lp takes a single scenario", file=sys.stderr)
        return EXIT_INPUT
    jobs = [(args, s, base / Path(s).stem) for s in args.scenario]
    codes = {}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = dict(pool.map(_synth_worker, jobs))
    else:
        codes = dict(_synth_worker(j) for j in jobs)
    for s, code in codes.items():
        print(f"{s}: exit {code}")
    return max(codes.values())


def cmd_monitor(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
        trace = Path(args.trace) if args.trace else scenario.trace_path()
        if trace is None:
            raise ScenarioError("no trace given and the scenario names none")
        traj = read_trajectory_csv(trace, scenario.variables)
        phi = scenario.formula_ast()
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        side = args.side or scenario.side
        profiles = _write_profiles(out, phi, traj, side, args.node or [0], scenario.variables)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_plot_data(out / "plot_data.csv", traj, None, profiles)
    if not args.no_plot:
        from .plotting import plot_run
        plot_run(out / "figure.png", traj, profiles, title=f"{scenario.name} ({side} time robustness)",
                 plan=_plan_pairs(scenario), regions=scenario.regions)
    for label, values in profiles.items():
        print(f"{label}: {' '.join(str(v) for v in values)}")
    return EXIT_OK


def cmd_list(args: argparse.Namespace) -> int:
    for name in bundled_scenarios():
        s = load_scenario(name)
        first = s.description.split(". ")[0].rstrip(".")
        print(f"{name:24s} {s.mode:8s} H={s.horizon:<4d} {first}")
    return EXIT_OK


def cmd_nodes(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
        phi = scenario.formula_ast()
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for k, node in enumerate(subformulas(phi)):
        print(f"{k:4d}  len={formula_horizon(node):<4d} {format_formula(node, scenario.variables)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trstl", description="Time-robust STL monitoring and control synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list bundled scenarios").set_defaults(func=cmd_list)

    p = sub.add_parser("nodes", help="print the subformula indices of a scenario's formula")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_nodes)

    p = sub.add_parser("synth", help="synthesise inputs for one or more scenarios")
    p.add_argument("scenario", nargs="+", help="scenario file or bundled scenario name")
    p.add_argument("--mode", choices=["max", "feas"])
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta-star", type=int)
    g.add_argument("--theta-target", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--side", choices=["right", "left"])
    p.add_argument("--solver", help="cbc, highs, or a YAML solver configuration file")
    p.add_argument("--time-limit", type=float)
    p.add_argument("--warm-start", action="store_true",
                   help="max mode: seed the solver with a solution at theta = theta_star")
    p.add_argument("--emit-lp", metavar="PATH")
    p.add_argument("--keep-solver-files", metavar="DIR")
    p.add_argument("--debug-csv", action="store_true", help="write the encoding variable map")
    p.add_argument("--node", type=int, action="append", help="subformula index to profile (repeatable)")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for several scenarios")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("monitor", help="robustness profiles of a recorded trace")
    p.add_argument("scenario")
    p.add_argument("--trace")
    p.add_argument("--node", type=int, action="append")
    p.add_argument("--side", choices=["right", "left"])
    p.add_argument("--out-dir", default="out")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_monitor)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth" and args.mode is None and args.theta_target is not None:
        args.mode = "feas"
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
