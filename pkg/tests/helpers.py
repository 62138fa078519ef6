"""Independent oracles and generators shared by the test modules.

Nothing here calls into the code under test except for the data types, so
the oracles can be trusted to check it.
"""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np

from trstl.milp import Model, VarKind
from trstl.stl import (Always, And, Eventually, Interval, LinearPredicate, Not, Or, Predicate,
                       Trajectory, Until)

# two-predicate trajectory: chi_p = (+,+,-,+,+,+,-,-); chi_q is + at t = 3, 4 and - from 5 on.
TWO_PRED_STATES = np.array([
    [1.0, -0.4], [0.5, -0.2], [-0.5, 0.6], [2.0, 1.2],
    [1.5, 0.4], [0.8, -0.7], [-1.0, -1.1], [-0.3, -0.5],
])
TWO_PRED = Trajectory(TWO_PRED_STATES, ("x1", "x2"))
P = Predicate(LinearPredicate((1, 0), 0))
Q = Predicate(LinearPredicate((0, 1), 0))
SIGN_PATTERN = (1, 1, 0, 1, 1, 1, 0, 0)


def signal_from_bits(bits) -> Trajectory:
    return Trajectory(np.array([[1.0 if b else -1.0] for b in bits]))


# -- brute-force semantics ---------------------------------------------------------------


def brute_chi_pred(p: LinearPredicate, states: np.ndarray, t: int) -> int:
    mu = sum(float(c) * states[t][i] for i, c in enumerate(p.coeffs)) + float(p.offset)
    return 1 if mu >= 0 else -1


def brute_theta_pred(p: LinearPredicate, states: np.ndarray, t: int, side: str) -> int:
    """Literal scan over every shift tau allowed inside the signal."""
    H = len(states) - 1
    chi = brute_chi_pred(p, states, t)
    best = 0
    limit = H - t if side == "right" else t
    for tau in range(limit + 1):
        window = range(t, t + tau + 1) if side == "right" else range(t - tau, t + 1)
        if all(brute_chi_pred(p, states, s) == chi for s in window):
            best = tau
    return chi * best


def naive(phi, states: np.ndarray, t: int, leaf) -> int:
    """Direct unmemoised recursion, Eventually/Always through their Until definitions."""
    if isinstance(phi, Predicate):
        return leaf(phi.pred, states, t)
    if isinstance(phi, Not):
        return -naive(phi.arg, states, t, leaf)
    if isinstance(phi, And):
        return min(naive(a, states, t, leaf) for a in phi.args)
    if isinstance(phi, Or):
        return max(naive(a, states, t, leaf) for a in phi.args)
    if isinstance(phi, Eventually):
        return max(naive(phi.arg, states, tp, leaf)
                   for tp in range(t + phi.interval.lo, t + phi.interval.hi + 1))
    if isinstance(phi, Always):
        return -naive(Eventually(phi.interval, Not(phi.arg)), states, t, leaf)
    if isinstance(phi, Until):
        vals = []
        for tp in range(t + phi.interval.lo, t + phi.interval.hi + 1):
            inner = [naive(phi.right, states, tp, leaf)]
            inner += [naive(phi.left, states, tpp, leaf) for tpp in range(t, tp)]
            vals.append(min(inner))
        return max(vals)
    raise TypeError(phi)


def naive_chi(phi, states, t):
    return naive(phi, states, t, brute_chi_pred)


def naive_theta(phi, states, t, side="right"):
    return naive(phi, states, t, lambda p, s, tt: brute_theta_pred(p, s, tt, side))


# -- random instances --------------------------------------------------------------------


def random_predicate(rng: random.Random, n: int) -> LinearPredicate:
    while True:
        coeffs = tuple(Fraction(rng.randint(-2, 2)) for _ in range(n))
        if any(coeffs):
            return LinearPredicate(coeffs, Fraction(rng.randint(-4, 4), 4))


def random_formula(rng: random.Random, depth: int, preds, max_hi: int = 3):
    if depth == 0 or rng.random() < 0.25:
        return Predicate(rng.choice(preds))
    kind = rng.choice(["not", "and", "or", "until", "ev", "alw"])
    sub = lambda: random_formula(rng, depth - 1, preds, max_hi)  # noqa: E731
    lo = rng.randint(0, max_hi)
    iv = Interval(lo, rng.randint(lo, max_hi))
    if kind == "not":
        return Not(sub())
    if kind == "and":
        return And((sub(), sub()))
    if kind == "or":
        return Or((sub(), sub()))
    if kind == "until":
        return Until(sub(), iv, sub())
    if kind == "ev":
        return Eventually(iv, sub())
    return Always(iv, sub())


def random_states(rng: random.Random, length: int, n: int) -> np.ndarray:
    # coarse grid so that mu hits exactly 0 now and then
    return np.array([[rng.choice([-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]) for _ in range(n)]
                     for _ in range(length)])


# -- exhaustive MILP enumeration ---------------------------------------------------------


def enumerate_feasible(model: Model, ranges: dict | None = None):
    """All feasible assignments of a small pure-integer model.

    Every variable must be integral or have an entry in ``ranges`` listing the
    values to try. Depth-first in declaration order; each row is checked as
    soon as its last variable is assigned.
    """
    ranges = ranges or {}
    variables = model.variables
    domains = []
    for v in variables:
        if v in ranges:
            domains.append(list(ranges[v]))
        elif v.kind is VarKind.CONTINUOUS:
            raise ValueError(f"continuous variable {v.name} needs an explicit range")
        else:
            domains.append(range(int(v.lower), int(v.upper) + 1))
    rows_at = [[] for _ in variables]
    for c in model.constraints:
        rows_at[max(v.index for _, v in c.terms)].append(c)
    assignment: dict = {}

    def dfs(k):
        if k == len(variables):
            yield dict(assignment)
            return
        v = variables[k]
        for val in domains[k]:
            assignment[v] = val
            if all(c.satisfied(assignment) for c in rows_at[k]):
                yield from dfs(k + 1)
        del assignment[v]

    yield from dfs(0)


def read_lp_counts(text: str) -> dict[str, int]:
    """Minimal LP reader: counts rows, bounds and declared integer/binary columns."""
    section = None
    counts = {"rows": 0, "bounds": 0, "generals": 0, "binaries": 0}
    row_open = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        key = line.lower()
        if key in ("maximize", "minimize", "subject to", "bounds", "generals", "binaries", "end"):
            section = key
            continue
        if section == "subject to":
            if not row_open:
                counts["rows"] += 1
            row_open = not any(op in line for op in ("<=", ">=", "="))
        elif section == "bounds":
            counts["bounds"] += 1
        elif section in ("generals", "binaries"):
            counts[section] += len(line.split())
    return counts
