"""Run an external MILP solver on an LP file and read its solution back.

Two solution-file dialects are understood:

``cbc``
    CBC's ``solu`` output: a status line (``Optimal - objective value 7``)
    followed by ``index name value reduced-cost`` rows.
``highs``
    HiGHS raw solution files (``Model status`` / ``# Columns N`` blocks).

The argv template may reference ``{model}``, ``{solution}``, ``{time_limit}``,
``{mip_gap}`` and ``{python}``.
"""

from __future__ import annotations

import logging
import os
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .model import LinExpr, Model, Var

log = logging.getLogger(__name__)

STATUSES = ("optimal", "feasible", "infeasible", "unbounded", "timeout", "error")
INTEGRALITY_TOL = 1e-6


class SolverError(RuntimeError):
    """The solver could not be started or its output could not be read."""


@dataclass
class SolverConfig:
    executable: str | None = None
    args: list[str] = field(default_factory=list)
    dialect: str = "highs"
    time_limit: float = 600.0
    mip_gap: float = 0.0
    keep_dir: str | None = None  # keep model/solution files here when set
    start_args: list[str] = field(default_factory=list)  # appended when a MIP start is given

    @classmethod
    def cbc(cls, executable: str | None = None, **kw) -> SolverConfig:
        return cls(executable=executable or find_cbc(),
                   args=["{model}", "sec", "{time_limit}", "ratio", "{mip_gap}", "allow", "0",
                         "printingOptions", "all", "solve", "solu", "{solution}"],
                   dialect="cbc", **kw)

    @classmethod
    def highs(cls, **kw) -> SolverConfig:
        return cls(executable=sys.executable,
                   args=["-m", "trstl.milp.highs_runner", "--time-limit", "{time_limit}",
                         "--mip-gap", "{mip_gap}", "{model}", "{solution}"],
                   start_args=["--start", "{start}"], dialect="highs", **kw)

    @classmethod
    def named(cls, name: str, **kw) -> SolverConfig:
        if name == "cbc":
            return cls.cbc(**kw)
        if name == "highs":
            return cls.highs(**kw)
        raise ValueError(f"unknown solver {name!r} (expected 'cbc' or 'highs')")

    @classmethod
    def default(cls, **kw) -> SolverConfig:
        """HiGHS when ``highspy`` is importable, CBC otherwise."""
        try:
            import highspy  # noqa: F401
        except ImportError:
            return cls.cbc(**kw)
        return cls.highs(**kw)

    @classmethod
    def from_dict(cls, data: Mapping) -> SolverConfig:
        data = dict(data)
        name = data.pop("name", None)
        if name is not None:
            return cls.named(name, **data)
        return cls(**data)

    def argv(self, model_path: str, solution_path: str, start_path: str | None = None) -> list[str]:
        if not self.executable:
            raise SolverError("no solver executable configured")
        subs = {"model": model_path, "solution": solution_path, "time_limit": f"{self.time_limit:g}",
                "mip_gap": f"{self.mip_gap:g}", "python": sys.executable, "start": start_path}
        args = self.args + (self.start_args if start_path else [])
        return [self.executable] + [a.format(**subs) for a in args]


def find_cbc() -> str | None:
    """CBC on PATH, else the binary bundled with PuLP."""
    path = shutil.which("cbc")
    if path:
        return path
    try:
        from pulp.apis.coin_api import pulp_cbc_path
    except ImportError:
        return None
    path = os.path.normpath(pulp_cbc_path)
    return path if os.path.exists(path) else None


@dataclass
class SolverOutcome:
    status: str
    objective_value: Fraction | None = None
    assignment: dict[Var, Fraction] = field(default_factory=dict)
    solve_time: float = 0.0
    message: str = ""

    @property
    def has_solution(self) -> bool:
        return self.status in ("optimal", "feasible")

    def value(self, expr) -> Fraction:
        return LinExpr.of(expr).value(self.assignment)

    def by_name(self) -> dict[str, Fraction]:
        return {v.name: x for v, x in self.assignment.items()}


def _ingest(model: Model, values: Mapping[str, str]) -> dict[Var, Fraction]:
    out: dict[Var, Fraction] = {}
    for v in model.variables:
        raw = values.get(v.name)
        x = Fraction(raw) if raw is not None else Fraction(0)
        if v.is_integral:
            r = round(x)
            if abs(x - r) > INTEGRALITY_TOL:
                raise SolverError(f"{v.name}={raw} is not integral within {INTEGRALITY_TOL}")
            x = Fraction(r)
        out[v] = x
    return out


def parse_cbc_solution(text: str, model: Model) -> tuple[str, str | None, dict[str, str]]:
    """Return ``(status, objective text, {name: value text})``."""
    lines = text.splitlines()
    if not lines:
        raise SolverError("empty CBC solution file")
    head = lines[0].strip()
    words = head.split()
    if head.startswith("Optimal"):
        status = "optimal"
    elif head.startswith(("Infeasible", "PrimalInfeasible", "Integer infeasible")):
        status = "infeasible"
    elif head.startswith(("Unbounded", "Dual infeasible")) or "unbounded" in head:
        status = "unbounded"
    elif head.startswith("Stopped on time"):
        status = "timeout" if "no integer solution" in head else "timeout_incumbent"
    elif head.startswith("Stopped"):
        status = "error" if "no integer solution" in head else "feasible"
    else:
        raise SolverError(f"unrecognised CBC status line: {head!r}")
    objective = words[-1] if "objective" in head else None
    names = {v.name for v in model.variables}
    values: dict[str, str] = {}
    for line in lines[1:]:
        tok = line.split()
        if tok and tok[0] == "**":
            tok = tok[1:]
        if len(tok) >= 3 and tok[1] in names:
            values[tok[1]] = tok[2]
    return status, objective, values


def parse_highs_solution(text: str, model: Model) -> tuple[str, str | None, dict[str, str]]:
    lines = [ln.strip() for ln in text.splitlines()]
    try:
        model_status = lines[lines.index("Model status") + 1]
    except (ValueError, IndexError):
        raise SolverError("HiGHS solution file lacks a model status") from None
    values: dict[str, str] = {}
    objective = None
    primal_feasible = False
    if "# Primal solution values" in lines:
        k = lines.index("# Primal solution values")
        primal_feasible = lines[k + 1] == "Feasible"
        for j in range(k + 1, len(lines)):
            if lines[j].startswith("Objective"):
                objective = lines[j].split()[1]
            if lines[j].startswith("# Columns"):
                n = int(lines[j].split()[2])
                for row in lines[j + 1:j + 1 + n]:
                    name, val = row.rsplit(None, 1)
                    values[name] = val
                break
    table = {"Optimal": "optimal", "Infeasible": "infeasible", "Unbounded": "unbounded",
             "Primal infeasible or unbounded": "infeasible", "Time limit reached": "timeout_incumbent"}
    status = table.get(model_status)
    if status is None:
        status = "feasible" if primal_feasible else "error"
    if status == "timeout_incumbent" and not primal_feasible:
        status = "timeout"
    return status, objective, values


_PARSERS = {"cbc": parse_cbc_solution, "highs": parse_highs_solution}


def solve(model: Model, config: SolverConfig | None = None,
          start: Mapping[Var, Fraction] | None = None) -> SolverOutcome:
    """Write ``model`` as LP, run the configured solver, read the solution.

    ``start`` is a full assignment handed over as a MIP start; solvers
    without ``start_args`` ignore it.

    ``timeout`` is reported both when the solver stops on its own time limit
    and when the process has to be killed; an incumbent found before the
    limit is kept in ``assignment``. A solution is only ``optimal`` when the
    solver proves it at the configured gap.
    """
    config = config or SolverConfig.default()
    if config.dialect not in _PARSERS:
        raise SolverError(f"unknown solution dialect {config.dialect!r}")
    if not config.executable or not (os.path.exists(config.executable) or shutil.which(config.executable)):
        raise SolverError(f"solver executable not found: {config.executable!r}")
    workdir = Path(config.keep_dir) if config.keep_dir else Path(tempfile.mkdtemp(prefix="trstl_"))
    workdir.mkdir(parents=True, exist_ok=True)
    lp_path = workdir / f"{model.name}.lp"
    sol_path = workdir / f"{model.name}.sol"
    lp_path.write_text(model.write_lp())
    if sol_path.exists():
        sol_path.unlink()
    start_path = None
    if start and config.start_args:
        start_path = workdir / f"{model.name}.start"
        start_path.write_text("".join(f"{v.name} {float(start[v])!r}\n" for v in model.variables))
    elif start:
        log.debug("solver has no MIP start support, start ignored")
    argv = config.argv(str(lp_path), str(sol_path), start_path and str(start_path))
    log.debug("running %s", " ".join(argv))
    start = time.perf_counter()
    killed = False
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.time_limit + 30)
        stdout, returncode = proc.stdout + proc.stderr, proc.returncode
    except subprocess.TimeoutExpired as exc:
        killed = True
        stdout, returncode = (exc.stdout or b"").decode(errors="replace") if isinstance(exc.stdout, bytes) \
            else (exc.stdout or ""), None
    except OSError as exc:
        raise SolverError(f"cannot start solver: {exc}") from exc
    elapsed = time.perf_counter() - start
    try:
        if not sol_path.exists():
            if killed:
                return SolverOutcome("timeout", solve_time=elapsed, message="solver killed at time limit")
            raise SolverError(f"solver exited with {returncode} and wrote no solution:\n{stdout[-2000:]}")
        status, objective, values = _PARSERS[config.dialect](sol_path.read_text(), model)
    finally:
        if not config.keep_dir:
            shutil.rmtree(workdir, ignore_errors=True)
    if killed:
        status = "timeout_incumbent" if values else "timeout"
    outcome = SolverOutcome("timeout" if status == "timeout_incumbent" else status,
                            solve_time=elapsed, message=stdout[-2000:])
    if status in ("optimal", "feasible", "timeout_incumbent") and values:
        outcome.assignment = _ingest(model, values)
        if model.objective.sense == "feasibility":
            outcome.objective_value = Fraction(0)
        else:
            # recompute from the assignment: CBC flips the sign of maximisation objectives
            outcome.objective_value = model.objective.expr.value(outcome.assignment)
    return outcome
