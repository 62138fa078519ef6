"""STL formulas over linear predicates, discrete-time signals and Boolean semantics.

Formulas are immutable trees. Predicates are ``coeffs . x + offset >= 0`` with
exact rational coefficients; signals are float arrays indexed by time step.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence, Union

import numpy as np

Number = Union[int, float, Fraction, str]


def to_fraction(value: Number) -> Fraction:
    """Exact rational from an int, decimal string, Fraction or float.

    Floats are converted through their shortest repr so that ``0.1`` becomes
    ``1/10`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


class FormulaError(ValueError):
    """Malformed formula, interval or predicate."""


class ParseError(FormulaError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text[:pos]}<here>{text[pos:]}")
        self.pos = pos


class HorizonError(ValueError):
    """Evaluation time plus formula horizon runs past the end of the trajectory."""


@dataclass(frozen=True)
class LinearPredicate:
    """``mu(x) = coeffs . x + offset``; the predicate holds iff ``mu(x) >= 0``."""

    coeffs: tuple[Fraction, ...]
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        coeffs = tuple(to_fraction(c) for c in self.coeffs)
        offset = to_fraction(self.offset)
        if not any(coeffs) and offset == 0:
            raise FormulaError("degenerate predicate: all coefficients and offset are zero")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "offset", offset)

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def mu(self, x: Sequence[float]) -> float:
        if len(x) != self.dim:
            raise ValueError(f"state has dimension {len(x)}, predicate expects {self.dim}")
        return float(sum(float(c) * float(xi) for c, xi in zip(self.coeffs, x)) + float(self.offset))

    def mu_signal(self, states: np.ndarray) -> np.ndarray:
        """``mu`` evaluated at every row of a ``(T, n)`` state array."""
        coeffs = np.array([float(c) for c in self.coeffs])
        return states @ coeffs + float(self.offset)

    def negated(self) -> LinearPredicate:
        return LinearPredicate(tuple(-c for c in self.coeffs), -self.offset)


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if not (isinstance(self.lo, int) and isinstance(self.hi, int)):
            raise FormulaError("interval bounds must be integers")
        if self.lo < 0 or self.hi < 0:
            raise FormulaError(f"negative interval bound in [{self.lo},{self.hi}]")
        if self.lo > self.hi:
            raise FormulaError(f"empty interval [{self.lo},{self.hi}]")


class Formula:
    """Base class for STL syntax nodes."""

    __slots__ = ()

    def children(self) -> tuple[Formula, ...]:
        return ()

    def __and__(self, other: Formula) -> Formula:
        return And((self, other))

    def __or__(self, other: Formula) -> Formula:
        return Or((self, other))

    def __invert__(self) -> Formula:
        return Not(self)


@dataclass(frozen=True)
class Predicate(Formula):
    pred: LinearPredicate


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


def _flatten(kind: type, args: Sequence[Formula]) -> tuple[Formula, ...]:
    flat: list[Formula] = []
    for a in args:
        if isinstance(a, kind):
            flat.extend(a.args)
        else:
            flat.append(a)
    return tuple(flat)


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def __post_init__(self):
        args = _flatten(And, self.args)
        if len(args) < 2:
            raise FormulaError("conjunction needs at least two operands")
        object.__setattr__(self, "args", args)

    def children(self):
        return self.args


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def __post_init__(self):
        args = _flatten(Or, self.args)
        if len(args) < 2:
            raise FormulaError("disjunction needs at least two operands")
        object.__setattr__(self, "args", args)

    def children(self):
        return self.args


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    interval: Interval
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    arg: Formula

    def children(self):
        return (self.arg,)


def conjunction(args: Sequence[Formula]) -> Formula:
    """And over ``args``, collapsing the single-operand case."""
    return args[0] if len(args) == 1 else And(tuple(args))


def disjunction(args: Sequence[Formula]) -> Formula:
    return args[0] if len(args) == 1 else Or(tuple(args))


def walk(phi: Formula) -> Iterator[Formula]:
    """Pre-order traversal; the root comes first."""
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def predicates(phi: Formula) -> list[LinearPredicate]:
    """Distinct predicates in first-occurrence order."""
    seen: dict[LinearPredicate, None] = {}
    for node in walk(phi):
        if isinstance(node, Predicate):
            seen.setdefault(node.pred, None)
    return list(seen)


def formula_horizon(phi: Formula) -> int:
    if isinstance(phi, (Predicate, _Top)):
        return 0
    if isinstance(phi, Not):
        return formula_horizon(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(formula_horizon(a) for a in phi.args)
    if isinstance(phi, Until):
        return phi.interval.hi + max(formula_horizon(phi.left), formula_horizon(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.interval.hi + formula_horizon(phi.arg)
    raise TypeError(f"not a formula: {phi!r}")


def expand_derived(phi: Formula) -> Formula:
    """Rewrite Eventually/Always into Until form (``F_I f = T U_I f``, ``G_I f = !F_I !f``).

    Returns ``phi`` with every derived operator expanded. ``T`` is represented
    by :data:`TRUE`, which both semantics treat as the identity of ``min``.
    """
    if isinstance(phi, Predicate):
        return phi
    if isinstance(phi, Not):
        return Not(expand_derived(phi.arg))
    if isinstance(phi, And):
        return And(tuple(expand_derived(a) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(expand_derived(a) for a in phi.args))
    if isinstance(phi, Until):
        return Until(expand_derived(phi.left), phi.interval, expand_derived(phi.right))
    if isinstance(phi, Eventually):
        return Until(TRUE, phi.interval, expand_derived(phi.arg))
    if isinstance(phi, Always):
        return Not(Until(TRUE, phi.interval, Not(expand_derived(phi.arg))))
    raise TypeError(f"not a formula: {phi!r}")


@dataclass(frozen=True)
class _Top(Formula):
    """Boolean true; only produced by :func:`expand_derived`."""


TRUE = _Top()


# ---------------------------------------------------------------------------
# Signals


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``x_0 .. x_H`` stored as a read-only ``(H+1, n)`` float array."""

    states: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        if states.ndim != 2 or states.shape[0] == 0:
            raise ValueError("trajectory needs at least one state")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.names and len(self.names) != states.shape[1]:
            raise ValueError("one name per state dimension required")
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.states.shape[0]

    def __eq__(self, other):
        return (isinstance(other, Trajectory) and self.names == other.names
                and np.array_equal(self.states, other.states))


def sign(value: float) -> int:
    # sign(0) = +1
    return 1 if value >= 0 else -1


class Evaluator:
    """Shared recursion of the Boolean and time-robust semantics.

    ``leaf(pred, t)`` gives the value of a predicate at ``t``. Negation flips
    the sign, And/Or are min/max, Until is max over ``t' in t+I`` of
    ``min(right(t'), left(t), ..., left(t'-1))`` with the empty prefix at
    ``t' = t`` contributing nothing. Results are memoised per node and time,
    so one instance can evaluate a whole profile cheaply.
    """

    def __init__(self, leaf: Callable[[LinearPredicate, int], int]):
        self.leaf = leaf
        self.cache: dict[tuple[int, int], int] = {}
        self._keep: list[Formula] = []

    def __call__(self, node: Formula, s: int) -> int:
        key = (id(node), s)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        self._keep.append(node)
        ev = self
        if isinstance(node, Predicate):
            val = self.leaf(node.pred, s)
        elif isinstance(node, Not):
            val = -ev(node.arg, s)
        elif isinstance(node, And):
            val = min(ev(a, s) for a in node.args)
        elif isinstance(node, Or):
            val = max(ev(a, s) for a in node.args)
        elif isinstance(node, Always):
            val = min(ev(node.arg, s + k) for k in range(node.interval.lo, node.interval.hi + 1))
        elif isinstance(node, Eventually):
            val = max(ev(node.arg, s + k) for k in range(node.interval.lo, node.interval.hi + 1))
        elif isinstance(node, Until):
            best = None
            for tp in range(s + node.interval.lo, s + node.interval.hi + 1):
                cand = ev(node.right, tp)
                if not isinstance(node.left, _Top):
                    for tpp in range(s, tp):
                        cand = min(cand, ev(node.left, tpp))
                best = cand if best is None else max(best, cand)
            val = best
        elif isinstance(node, _Top):
            raise FormulaError("TRUE may only appear as the left operand of Until")
        else:
            raise TypeError(f"not a formula: {node!r}")
        self.cache[key] = val
        return val


def evaluate(phi: Formula, t: int, leaf: Callable[[LinearPredicate, int], int]) -> int:
    return Evaluator(leaf)(phi, t)


def _check_time(phi: Formula, traj: Trajectory, t: int) -> None:
    if t < 0:
        raise HorizonError(f"negative time {t}")
    if t + formula_horizon(phi) > traj.horizon:
        raise HorizonError(
            f"t={t} plus formula horizon {formula_horizon(phi)} exceeds trajectory horizon {traj.horizon}")


def char_function(phi: Formula, traj: Trajectory, t: int) -> int:
    """chi in {+1, -1}: Boolean satisfaction of ``phi`` by ``traj`` at ``t``."""
    _check_time(phi, traj, t)
    mus: dict[LinearPredicate, np.ndarray] = {}

    def leaf(pred: LinearPredicate, s: int) -> int:
        if pred not in mus:
            mus[pred] = pred.mu_signal(traj.states)
        return sign(mus[pred][s])

    return evaluate(phi, t, leaf)


# ---------------------------------------------------------------------------
# Concrete syntax

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<op>>=|<=|[()\[\],!&|*+-])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, var_names: Sequence[str]):
        if len(set(var_names)) != len(var_names):
            raise FormulaError("variable names must be distinct")
        self.text = text
        self.index = {name: i for i, name in enumerate(var_names)}
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def error(self, message: str):
        raise ParseError(message, self.text, self.peek()[2])

    def take(self, value: str | None = None, kind: str | None = None):
        tok = self.peek()
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            self.error(f"expected {value or kind}, found {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok

    def is_temporal(self, keyword: str) -> bool:
        tok = self.peek()
        return tok[0] == "ident" and tok[1] == keyword and self.peek(1)[1] == "["

    def parse(self) -> Formula:
        phi = self.formula()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return phi

    def formula(self) -> Formula:
        args = [self.and_expr()]
        while self.peek()[1] == "|":
            self.take("|")
            args.append(self.and_expr())
        return disjunction(args)

    def and_expr(self) -> Formula:
        args = [self.unary()]
        while self.peek()[1] == "&":
            self.take("&")
            args.append(self.unary())
        return conjunction(args)

    def unary(self) -> Formula:
        if self.peek()[1] == "!":
            self.take("!")
            return Not(self.unary())
        if self.is_temporal("G"):
            self.take()
            interval = self.interval()
            return Always(interval, self.unary())
        if self.is_temporal("F"):
            self.take()
            interval = self.interval()
            return Eventually(interval, self.unary())
        left = self.atom()
        if self.is_temporal("U"):
            self.take()
            interval = self.interval()
            return Until(left, interval, self.unary())
        return left

    def interval(self) -> Interval:
        start = self.peek()[2]
        self.take("[")
        lo = self.integer()
        self.take(",")
        hi = self.integer()
        self.take("]")
        try:
            return Interval(lo, hi)
        except FormulaError as exc:
            raise ParseError(str(exc), self.text, start) from None

    def integer(self) -> int:
        neg = False
        if self.peek()[1] == "-":
            self.take("-")
            neg = True
        tok = self.take(kind="num")
        if not re.fullmatch(r"\d+", tok[1]):
            raise ParseError(f"interval bound {tok[1]!r} is not an integer", self.text, tok[2])
        return -int(tok[1]) if neg else int(tok[1])

    def atom(self) -> Formula:
        if self.peek()[1] == "(":
            # a parenthesis opens either a subformula or a parenthesised linear expression;
            # try the formula reading first and fall back
            save = self.i
            self.take("(")
            try:
                phi = self.formula()
                self.take(")")
                if self.peek()[1] not in (">=", "<="):
                    return phi
            except ParseError:
                pass
            self.i = save
        return self.predicate()

    def predicate(self) -> Formula:
        start = self.peek()[2]
        coeffs, const = self.linexpr()
        tok = self.peek()
        if tok[1] not in (">=", "<="):
            self.error("expected '>=' or '<='")
        self.take()
        sign_ = 1
        if self.peek()[1] == "-":
            self.take("-")
            sign_ = -1
        rhs = sign_ * Fraction(self.take(kind="num")[1])
        # linexpr >= rhs  ->  linexpr - rhs >= 0 ; linexpr <= rhs -> rhs - linexpr >= 0
        vec = [coeffs.get(i, Fraction(0)) for i in range(len(self.index))]
        offset = const - rhs
        if tok[1] == "<=":
            vec = [-c for c in vec]
            offset = -offset
        try:
            return Predicate(LinearPredicate(tuple(vec), offset))
        except FormulaError as exc:
            raise ParseError(str(exc), self.text, start) from None

    def linexpr(self) -> tuple[dict[int, Fraction], Fraction]:
        coeffs: dict[int, Fraction] = {}
        const = Fraction(0)
        sign_ = 1
        if self.peek()[1] == "-":
            self.take("-")
            sign_ = -1
        while True:
            idx, val = self.term()
            if idx is None:
                const += sign_ * val
            else:
                coeffs[idx] = coeffs.get(idx, Fraction(0)) + sign_ * val
            if self.peek()[1] in ("+", "-"):
                sign_ = 1 if self.take()[1] == "+" else -1
            else:
                return coeffs, const

    def term(self) -> tuple[int | None, Fraction]:
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            value = Fraction(tok[1])
            if self.peek()[1] == "*":
                self.take("*")
                return self.variable(), value
            return None, value
        if tok[0] == "ident":
            return self.variable(), Fraction(1)
        if tok[1] == "(":
            self.error("parenthesised arithmetic is not supported")
        self.error(f"expected a term, found {tok[1] or 'end of input'!r}")

    def variable(self) -> int:
        tok = self.take(kind="ident")
        if tok[1] not in self.index:
            raise ParseError(f"unknown variable {tok[1]!r}", self.text, tok[2])
        return self.index[tok[1]]


def parse_formula(text: str, var_names: Sequence[str]) -> Formula:
    """Parse the ASCII grammar into a formula over ``var_names``.

    >>> parse_formula("G[20,30] (z >= 20)", ["z", "vz"])
    Always(interval=Interval(lo=20, hi=30), arg=Predicate(pred=LinearPredicate(coeffs=(Fraction(1, 1), Fraction(0, 1)), offset=Fraction(-20, 1))))
    """
    return _Parser(text, list(var_names)).parse()


def format_number(value: Fraction) -> str:
    """Shortest exact decimal for terminating fractions, ``p/q`` never."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return repr(float(value))
    digits = max(twos, fives)
    scaled = value * 10 ** digits
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    out = f"{s[:-digits]}.{s[-digits:]}".rstrip("0").rstrip(".")
    return ("-" if value < 0 else "") + out


def format_predicate(pred: LinearPredicate, var_names: Sequence[str]) -> str:
    """``expr >= c``, or ``expr <= c`` when the leading coefficient is negative."""
    lead = next((c for c in pred.coeffs if c != 0), 1)
    if lead < 0:
        flipped = format_predicate(pred.negated(), var_names)
        return flipped.replace(" >= ", " <= ")
    parts = []
    for c, name in zip(pred.coeffs, var_names):
        if c == 0:
            continue
        mag = abs(c)
        body = name if mag == 1 else f"{format_number(mag)}*{name}"
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    if not parts:
        parts.append("0")
    return f"{' '.join(parts)} >= {format_number(-pred.offset)}"


def format_formula(phi: Formula, var_names: Sequence[str]) -> str:
    """Fully parenthesised text that :func:`parse_formula` reads back to ``phi``."""
    if isinstance(phi, Predicate):
        return f"({format_predicate(phi.pred, var_names)})"
    if isinstance(phi, Not):
        return f"(!{format_formula(phi.arg, var_names)})"
    if isinstance(phi, And):
        return "(" + " & ".join(format_formula(a, var_names) for a in phi.args) + ")"
    if isinstance(phi, Or):
        return "(" + " | ".join(format_formula(a, var_names) for a in phi.args) + ")"
    if isinstance(phi, Always):
        return f"(G[{phi.interval.lo},{phi.interval.hi}] {format_formula(phi.arg, var_names)})"
    if isinstance(phi, Eventually):
        return f"(F[{phi.interval.lo},{phi.interval.hi}] {format_formula(phi.arg, var_names)})"
    if isinstance(phi, Until):
        return (f"({format_formula(phi.left, var_names)} U[{phi.interval.lo},{phi.interval.hi}] "
                f"{format_formula(phi.right, var_names)})")
    raise TypeError(f"cannot format {phi!r}")
