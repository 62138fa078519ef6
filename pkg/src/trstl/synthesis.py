"""Time-robust control synthesis for discrete-time linear systems.

``synthesize`` builds one MILP (dynamics, predicate counters, operator
selectors, hard constraints, objective), solves it, then replays the
returned inputs through the dynamics and recomputes the robustness with the
exact monitor. The MILP value is only trusted when both agree.

With ``warm_start`` a maximisation first solves the easier problem that
pins theta to ``theta_star`` and hands that point to the solver as a MIP
start, so a run cut short by the time limit still returns a certified
answer.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .encoder import EncodedNode, EncoderConfig, TimeRobustEncoder, encode_formula
from .milp import LinExpr, Model, SolverConfig, SolverOutcome, Var, solve
from .monitor import Side, time_robustness
from .stl import Formula, LinearPredicate, Trajectory, formula_horizon, to_fraction

log = logging.getLogger(__name__)

STATE_TOL = 1e-6


class SynthesisError(RuntimeError):
    pass


class StateBoxError(SynthesisError):
    def __init__(self, t: int, dim: int, value: float, bounds):
        super().__init__(f"state x_{t}[{dim}] = {value!r} leaves the state box {bounds}")
        self.t = t


class CertificateError(SynthesisError):
    """The monitor disagrees with the MILP objective on the re-simulated trajectory."""

    def __init__(self, result: SynthesisResult):
        super().__init__(
            f"certificate mismatch: MILP theta={result.theta_milp}, monitor theta={result.theta_monitor}")
        self.result = result


def _box(bounds) -> tuple[tuple[Fraction | None, Fraction | None], ...]:
    out = []
    for lb, ub in bounds:
        lb = None if lb is None or float(lb) == float("-inf") else to_fraction(lb)
        ub = None if ub is None or float(ub) == float("inf") else to_fraction(ub)
        if lb is not None and ub is not None and lb > ub:
            raise ValueError(f"empty box interval [{lb}, {ub}]")
        out.append((lb, ub))
    return tuple(out)


def _matrix(rows, name: str) -> tuple[tuple[Fraction, ...], ...]:
    mat = tuple(tuple(to_fraction(v) for v in row) for row in rows)
    if mat and len({len(r) for r in mat}) != 1:
        raise ValueError(f"{name} has ragged rows")
    return mat


@dataclass(frozen=True)
class LtiSystem:
    """``x_{t+1} = A x_t + B u_t`` on a state box with a box of admissible inputs."""

    A: tuple[tuple[Fraction, ...], ...]
    B: tuple[tuple[Fraction, ...], ...]
    state_box: tuple[tuple[Fraction | None, Fraction | None], ...]
    input_box: tuple[tuple[Fraction | None, Fraction | None], ...]
    x0: tuple[Fraction, ...]

    def __post_init__(self):
        A, B = _matrix(self.A, "A"), _matrix(self.B, "B")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "state_box", _box(self.state_box))
        object.__setattr__(self, "input_box", _box(self.input_box))
        object.__setattr__(self, "x0", tuple(to_fraction(v) for v in self.x0))
        n = len(A)
        if any(len(r) != n for r in A):
            raise ValueError("A must be square")
        if len(B) != n:
            raise ValueError(f"B has {len(B)} rows, expected {n}")
        m = len(B[0]) if B else 0
        if len(self.state_box) != n or len(self.x0) != n:
            raise ValueError("state box and x0 must match the state dimension")
        if len(self.input_box) != m:
            raise ValueError("input box must match the input dimension")
        for i, (x, (lb, ub)) in enumerate(zip(self.x0, self.state_box)):
            if (lb is not None and x < lb) or (ub is not None and x > ub):
                raise ValueError(f"x0[{i}] = {x} outside the state box")

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def m(self) -> int:
        return len(self.B[0]) if self.B else 0


def build_dynamics(model: Model, system: LtiSystem, H: int) -> tuple[list[list[Var]], list[list[Var]]]:
    """State variables ``x[t][i]`` for ``t <= H`` and inputs ``u[t][j]`` for ``t < H``."""
    X = [[model.continuous(f"x_{t}_{i}", *system.state_box[i]) for i in range(system.n)]
         for t in range(H + 1)]
    U = [[model.continuous(f"u_{t}_{j}", *system.input_box[j]) for j in range(system.m)]
         for t in range(H)]
    for i in range(system.n):
        model.fix(X[0][i], system.x0[i])
    for t in range(H):
        for i in range(system.n):
            rhs = LinExpr()
            for k, a in enumerate(system.A[i]):
                rhs.add_term(X[t][k], a)
            for j, b in enumerate(system.B[i]):
                rhs.add_term(U[t][j], b)
            model.add(LinExpr.of(X[t + 1][i]) == rhs)
    return X, U


def simulate(system: LtiSystem, inputs: Sequence[Sequence], names: Sequence[str] = (),
             check_box: bool = True, tol: float = STATE_TOL) -> Trajectory:
    """Forward iteration in exact rational arithmetic, returned as floats.

    Raises :class:`StateBoxError` at the first state leaving the box by more than ``tol``.
    """
    x = list(system.x0)
    states = [x]
    for t, u in enumerate(inputs):
        u = [to_fraction(v) for v in u]
        if len(u) != system.m:
            raise ValueError(f"input u_{t} has dimension {len(u)}, expected {system.m}")
        x = [sum((a * xk for a, xk in zip(system.A[i], x)), Fraction(0))
             + sum((b * uj for b, uj in zip(system.B[i], u)), Fraction(0)) for i in range(system.n)]
        states.append(x)
    if check_box:
        for t, xs in enumerate(states):
            for i, (v, (lb, ub)) in enumerate(zip(xs, system.state_box)):
                if (lb is not None and v < lb - Fraction(tol)) or (ub is not None and v > ub + Fraction(tol)):
                    raise StateBoxError(t, i, float(v), (lb, ub))
    return Trajectory(np.array([[float(v) for v in xs] for xs in states]), tuple(names))


@dataclass
class SynthesisProblem:
    system: LtiSystem
    formula: Formula
    horizon: int
    side: Side = "right"
    mode: str = "max"  # "max" or "feas"
    theta_star: int = 1
    theta_target: int | None = None
    hard_constraints: Sequence[LinearPredicate] = ()
    eps: Fraction = Fraction(1, 10_000)
    margin: Fraction | None = None  # defaults to eps / 2
    solver: SolverConfig | None = None
    names: Sequence[str] = ()
    warm_start: bool = False  # max mode: seed with a solution at theta = theta_star

    def __post_init__(self):
        if self.mode not in ("max", "feas"):
            raise ValueError(f"mode must be 'max' or 'feas', got {self.mode!r}")
        if self.mode == "max" and self.theta_star <= 0:
            raise ValueError("theta_star must be a positive integer")
        if self.mode == "feas" and self.theta_target is None:
            raise ValueError("feasibility mode needs theta_target")
        if self.horizon < formula_horizon(self.formula):
            raise ValueError(f"horizon {self.horizon} below formula horizon {formula_horizon(self.formula)}")
        for p in self.hard_constraints:
            if p.dim != self.system.n:
                raise ValueError("hard constraint dimension differs from the state dimension")


@dataclass
class SynthesisResult:
    status: str
    inputs: np.ndarray | None = None
    trajectory: Trajectory | None = None
    theta_milp: int | None = None
    theta_monitor: int | None = None
    certificate_ok: bool = False
    counts: dict = field(default_factory=dict)
    build_time: float = 0.0
    solve_time: float = 0.0
    max_state_deviation: float | None = None
    model: Model | None = field(default=None, repr=False)
    encoder: TimeRobustEncoder | None = field(default=None, repr=False)
    root: EncodedNode | None = field(default=None, repr=False)
    outcome: SolverOutcome | None = field(default=None, repr=False)

    def milp_profiles(self) -> dict[str, dict[int, int]]:
        """theta values chosen by the solver for every encoded node."""
        if self.outcome is None or not self.outcome.assignment:
            return {}
        return {enc.node_id: enc.theta_values(self.outcome.assignment) for enc in self.encoder.nodes}


def build_model(problem: SynthesisProblem) -> tuple[Model, list, list, EncodedNode, TimeRobustEncoder]:
    H = problem.horizon
    model = Model("trstl")
    X, U = build_dynamics(model, problem.system, H)
    margin = problem.eps / 2 if problem.margin is None else problem.margin
    config = EncoderConfig(H, problem.system.state_box, problem.eps, problem.side, margin)
    root, encoder = encode_formula(model, problem.formula, X, config)
    for p in problem.hard_constraints:
        for t in range(H + 1):
            mu = LinExpr(constant=p.offset)
            for c, xi in zip(p.coeffs, X[t]):
                mu.add_term(xi, c)
            model.add(mu >= 0)
    theta0 = root.theta[0]
    if problem.mode == "max":
        model.add(LinExpr.of(theta0) >= problem.theta_star)
        model.maximize(theta0)
    else:
        model.fix(theta0, problem.theta_target)
        model.feasibility()
    return model, X, U, root, encoder


def _seed(problem: SynthesisProblem, model: Model, config: SolverConfig) -> tuple[dict | None, float]:
    seed = dataclasses.replace(problem, mode="feas", theta_target=problem.theta_star, warm_start=False)
    out = solve(build_model(seed)[0], config)
    log.info("warm start at theta=%s: %s after %.1f s", problem.theta_star, out.status, out.solve_time)
    values = out.by_name()
    if not out.assignment or any(v.name not in values for v in model.variables):
        return None, out.solve_time
    return {v: values[v.name] for v in model.variables}, out.solve_time


def synthesize(problem: SynthesisProblem, raise_on_mismatch: bool = True) -> SynthesisResult:
    """Solve the synthesis MILP and certify the answer with the monitor.

    Infeasible, unbounded, timed-out-without-incumbent and solver-error
    outcomes come back as a result with that status and no trajectory.
    """
    t0 = time.perf_counter()
    model, X, U, root, encoder = build_model(problem)
    build_time = time.perf_counter() - t0
    config = problem.solver or SolverConfig.default()
    start, seed_time = None, 0.0
    if problem.warm_start and problem.mode == "max":
        start, seed_time = _seed(problem, model, config)
        config = dataclasses.replace(config, time_limit=max(config.time_limit - seed_time, 10.0))
    outcome = solve(model, config, start)
    result = SynthesisResult(outcome.status, counts=model.counts(), build_time=build_time,
                             solve_time=seed_time + outcome.solve_time, model=model, encoder=encoder,
                             root=root, outcome=outcome)
    if not outcome.assignment:
        return result
    a = outcome.assignment
    inputs = [[a[u] for u in row] for row in U]
    result.inputs = np.array([[float(v) for v in row] for row in inputs]).reshape(problem.horizon,
                                                                                  problem.system.m)
    traj = simulate(problem.system, inputs, problem.names)
    result.trajectory = traj
    solver_states = np.array([[float(a[x]) for x in row] for row in X])
    result.max_state_deviation = float(np.max(np.abs(solver_states - traj.states)))
    result.theta_milp = int(a[root.theta[0]])
    result.theta_monitor = time_robustness(problem.formula, traj, 0, problem.side)
    ok = result.theta_milp == result.theta_monitor
    if problem.mode == "max":
        ok = ok and result.theta_monitor >= problem.theta_star
    else:
        ok = ok and result.theta_monitor == problem.theta_target
    result.certificate_ok = ok
    log.info("status=%s theta_milp=%s theta_monitor=%s", result.status, result.theta_milp,
             result.theta_monitor)
    if not ok and result.theta_milp != result.theta_monitor and raise_on_mismatch:
        raise CertificateError(result)
    return result


def time_robust_control(phi: Formula, system: LtiSystem, H: int, theta_star: int = 1,
                        **kw) -> np.ndarray:
    """Optimal input sequence ``u*_0 .. u*_{H-1}`` maximising theta at ``t = 0``.

    Raises :class:`SynthesisError` when no certified solution is found.
    """
    res = synthesize(SynthesisProblem(system, phi, H, theta_star=theta_star, **kw))
    if not res.certificate_ok or res.inputs is None:
        raise SynthesisError(f"synthesis failed with status {res.status}")
    return res.inputs
