"""YAML scenario files: system, specification, mode and solver settings.

A scenario looks like::

    name: uav
    system:
      variables: [z, vz]
      A: [[1, 1], [0, 1]]
      B: [[0.5], [1]]
      x0: [0, 0]
      state_box: [[-10, 110], [-10, 10]]
      input_box: [[-0.2, 0.2]]        # or {inf_norm: 0.2}
    spec:
      formula: G[20,30] (z >= 20) & G[60,70] (z <= 10)
      hard_constraints: [vz <= 1.5, vz >= -1.5]
      horizon: 99
      side: right
    mode: {kind: max, theta_star: 1}   # warm_start: true seeds from theta = theta_star
    solver: {name: highs, time_limit: 600}

Formulas may use ``in(Region, a, b, ...)``, which expands to the conjunction
of ``lo <= a <= hi`` bounds for each listed variable, with the rectangles
taken from ``spec.regions``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .milp import SolverConfig
from .stl import And, Formula, FormulaError, Predicate, format_number, formula_horizon, parse_formula, to_fraction
from .synthesis import LtiSystem, SynthesisProblem

MODES = ("max", "feas", "monitor")
_IN_MACRO = re.compile(r"\bin\(\s*([A-Za-z_]\w*)\s*((?:,\s*[A-Za-z_]\w*\s*)+)\)")


class ScenarioError(ValueError):
    pass


def expand_regions(text: str, regions: dict[str, list]) -> str:
    def repl(match: re.Match) -> str:
        name = match.group(1)
        names = [v.strip() for v in match.group(2).split(",") if v.strip()]
        if name not in regions:
            raise ScenarioError(f"unknown region {name!r} in {match.group(0)!r}")
        box = regions[name]
        if len(box) != len(names):
            raise ScenarioError(f"region {name} has {len(box)} dimensions, {match.group(0)!r} lists {len(names)}")
        parts = []
        for var, (lo, hi) in zip(names, box):
            parts.append(f"{var} >= {format_number(to_fraction(lo))}")
            parts.append(f"{var} <= {format_number(to_fraction(hi))}")
        return "(" + " & ".join(parts) + ")"

    return _IN_MACRO.sub(repl, text)


def _pairs(rows, what: str) -> list[tuple]:
    try:
        out = [(None if lo is None else lo, None if hi is None else hi) for lo, hi in rows]
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} must be a list of [lower, upper] pairs") from None
    return out


def _input_box(raw, m: int) -> list[tuple]:
    if isinstance(raw, dict):
        if set(raw) != {"inf_norm"}:
            raise ScenarioError("input_box mapping only supports the key 'inf_norm'")
        r = raw["inf_norm"]
        return [(-r, r)] * m
    return _pairs(raw, "input_box")


def _plain(x):
    """Numbers as YAML-friendly ints/floats."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    return x


@dataclass
class Scenario:
    name: str
    variables: list[str]
    formula: str
    horizon: int
    A: list[list] = field(default_factory=list)
    B: list[list] = field(default_factory=list)
    x0: list = field(default_factory=list)
    state_box: list[tuple] = field(default_factory=list)
    input_box: list[tuple] = field(default_factory=list)
    hard_constraints: list[str] = field(default_factory=list)
    regions: dict[str, list] = field(default_factory=dict)
    side: str = "right"
    mode: str = "max"
    theta_star: int = 1
    theta_target: int | None = None
    warm_start: bool = False
    eps: float = 1e-4
    solver: dict[str, Any] = field(default_factory=dict)
    trace: str | None = None
    expected: dict[str, Any] = field(default_factory=dict)
    description: str = ""
    source: Path | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.side not in ("right", "left"):
            raise ScenarioError(f"side must be 'right' or 'left', got {self.side!r}")
        if len(set(self.variables)) != len(self.variables):
            raise ScenarioError("variable names must be distinct")
        phi = self.formula_ast()
        if formula_horizon(phi) > self.horizon:
            raise ScenarioError(f"formula horizon {formula_horizon(phi)} exceeds horizon {self.horizon}")
        self.hard_predicates()
        if self.mode != "monitor":
            self.system()
        if self.mode == "feas" and self.theta_target is None:
            raise ScenarioError("feasibility mode needs theta_target")

    # -- derived objects ---------------------------------------------------------------

    def expanded_formula(self) -> str:
        return expand_regions(self.formula, self.regions)

    def formula_ast(self) -> Formula:
        return parse_formula(self.expanded_formula(), self.variables)

    def hard_predicates(self):
        out = []
        for text in self.hard_constraints:
            phi = parse_formula(expand_regions(text, self.regions), self.variables)
            parts = phi.args if isinstance(phi, And) else (phi,)
            if not all(isinstance(p, Predicate) for p in parts):
                raise FormulaError(f"hard constraint {text!r} must be a predicate or a conjunction of predicates")
            out.extend(p.pred for p in parts)
        return out

    def system(self) -> LtiSystem:
        n = len(self.variables)
        if len(self.A) != n:
            raise ScenarioError(f"A has {len(self.A)} rows but there are {n} variables")
        try:
            return LtiSystem(self.A, self.B, self.state_box, self.input_box, self.x0)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    def solver_config(self, **overrides) -> SolverConfig:
        data = {"name": "highs", **self.solver, **{k: v for k, v in overrides.items() if v is not None}}
        return SolverConfig.from_dict(data)

    def problem(self, solver: SolverConfig | None = None, **overrides) -> SynthesisProblem:
        """Synthesis problem, with optional overrides of mode, theta_star, theta_target, horizon, side, warm_start."""
        mode = overrides.get("mode") or self.mode
        if mode == "monitor":
            raise ScenarioError(f"scenario {self.name} is a monitoring scenario")
        theta_target = overrides.get("theta_target")
        theta_target = self.theta_target if theta_target is None else theta_target
        if mode == "feas" and theta_target is None:
            raise ScenarioError("feasibility mode needs theta_target")
        return SynthesisProblem(
            system=self.system(),
            formula=self.formula_ast(),
            horizon=overrides.get("horizon") or self.horizon,
            side=overrides.get("side") or self.side,
            mode=mode,
            theta_star=overrides.get("theta_star") or self.theta_star,
            theta_target=theta_target,
            hard_constraints=self.hard_predicates(),
            eps=to_fraction(self.eps),
            solver=solver or self.solver_config(),
            names=tuple(self.variables),
            warm_start=bool(overrides.get("warm_start") or self.warm_start),
        )

    def trace_path(self) -> Path | None:
        if self.trace is None:
            return None
        p = Path(self.trace)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    # -- (de)serialisation ------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, source: Path | None = None) -> Scenario:
        data = dict(data)
        try:
            system = dict(data.pop("system"))
            spec = dict(data.pop("spec"))
        except KeyError as exc:
            raise ScenarioError(f"missing section {exc.args[0]!r}") from None
        mode = data.pop("mode", {"kind": "max"})
        if isinstance(mode, str):
            mode = {"kind": mode}
        variables = list(system.pop("variables"))
        B = system.pop("B", [])
        m = len(B[0]) if B else 0
        kw = dict(
            name=str(data.pop("name", source.stem if source else "scenario")),
            description=str(data.pop("description", "")),
            variables=variables,
            A=system.pop("A", []),
            B=B,
            x0=system.pop("x0", []),
            state_box=_pairs(system.pop("state_box", []), "state_box"),
            input_box=_input_box(system.pop("input_box", []), m),
            formula=str(spec.pop("formula")),
            hard_constraints=[str(h) for h in spec.pop("hard_constraints", [])],
            regions={k: [list(r) for r in v] for k, v in spec.pop("regions", {}).items()},
            horizon=int(spec.pop("horizon")),
            side=spec.pop("side", "right"),
            eps=spec.pop("eps", 1e-4),
            mode=mode.get("kind", "max"),
            theta_star=int(mode.get("theta_star", 1)),
            theta_target=None if mode.get("theta_target") is None else int(mode["theta_target"]),
            trace=mode.get("trace"),
            warm_start=bool(mode.get("warm_start", False)),
            solver=dict(data.pop("solver", {})),
            expected=dict(data.pop("expected", {})),
            source=source,
        )
        leftover = [*(f"system.{k}" for k in system), *(f"spec.{k}" for k in spec), *data]
        if leftover:
            raise ScenarioError(f"unknown scenario keys: {', '.join(leftover)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        system: dict[str, Any] = {"variables": list(self.variables)}
        if self.A:
            system.update(
                A=[[_plain(to_fraction(v)) for v in row] for row in self.A],
                B=[[_plain(to_fraction(v)) for v in row] for row in self.B],
                x0=[_plain(to_fraction(v)) for v in self.x0],
                state_box=[[lo, hi] for lo, hi in self.state_box],
                input_box=[[lo, hi] for lo, hi in self.input_box],
            )
        spec: dict[str, Any] = {"formula": self.formula}
        if self.regions:
            spec["regions"] = {k: [list(r) for r in v] for k, v in self.regions.items()}
        if self.hard_constraints:
            spec["hard_constraints"] = list(self.hard_constraints)
        spec.update(horizon=self.horizon, side=self.side, eps=self.eps)
        mode: dict[str, Any] = {"kind": self.mode}
        if self.mode == "max":
            mode["theta_star"] = self.theta_star
            if self.warm_start:
                mode["warm_start"] = True
        elif self.mode == "feas":
            mode["theta_target"] = self.theta_target
        if self.trace is not None:
            mode["trace"] = self.trace
        out: dict[str, Any] = {"name": self.name}
        if self.description:
            out["description"] = self.description
        out.update(system=system, spec=spec, mode=mode)
        if self.solver:
            out["solver"] = dict(self.solver)
        if self.expected:
            out["expected"] = dict(self.expected)
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None, width=100)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str, source: Path | None = None) -> Scenario:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"not a valid YAML document: {exc}") from None
        if not isinstance(data, dict):
            raise ScenarioError("scenario file must hold a mapping")
        return cls.from_dict(data, source)

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        path = Path(path)
        return cls.loads(path.read_text(), path)


# -- bundled scenarios ---------------------------------------------------------------------


def _bundle_dir() -> Path:
    return Path(str(resources.files("trstl") / "scenarios"))


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in _bundle_dir().glob("*.yaml"))


def bundled_path(name: str) -> Path:
    path = _bundle_dir() / f"{name}.yaml"
    if not path.exists():
        raise ScenarioError(f"no bundled scenario {name!r}; available: {', '.join(bundled_scenarios())}")
    return path


def load_scenario(name_or_path: str | Path) -> Scenario:
    """A scenario file, or a bundled scenario by name."""
    p = Path(name_or_path)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return Scenario.load(p)
    return Scenario.load(bundled_path(str(name_or_path)))
