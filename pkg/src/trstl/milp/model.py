"""Solver-agnostic MILP model: variables, linear constraints, objective, LP output."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

from ..stl import format_number, to_fraction


class VarKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class ModelError(ValueError):
    pass


@dataclass(eq=False)
class Var:
    """Model variable. ``None`` bounds mean unbounded in that direction.

    Hashes by identity; use ``LinExpr(x) == ...`` to build an equality row.
    """

    index: int
    name: str
    kind: VarKind
    lower: Fraction | None
    upper: Fraction | None

    def __repr__(self):
        return f"Var({self.name})"

    @property
    def is_integral(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS

    def __add__(self, other):
        return LinExpr.of(self) + other

    __radd__ = __add__

    def __sub__(self, other):
        return LinExpr.of(self) - other

    def __rsub__(self, other):
        return other - LinExpr.of(self)

    def __mul__(self, k):
        return LinExpr.of(self) * k

    __rmul__ = __mul__

    def __neg__(self):
        return LinExpr.of(self) * -1

    def __le__(self, other):
        return LinExpr.of(self) <= other

    def __ge__(self, other):
        return LinExpr.of(self) >= other


Scalar = Union[int, float, Fraction, str]
ExprLike = Union["LinExpr", Var, Scalar]


class LinExpr:
    """``sum(coef * var) + constant`` with exact rational coefficients."""

    __slots__ = ("terms", "constant")
    __hash__ = None  # == builds a constraint

    def __init__(self, terms: Mapping[Var, Fraction] | None = None, constant: Scalar = 0):
        self.terms: dict[Var, Fraction] = dict(terms or {})
        self.constant = to_fraction(constant)

    @classmethod
    def of(cls, value: ExprLike) -> LinExpr:
        if isinstance(value, LinExpr):
            return value
        if isinstance(value, Var):
            return cls({value: Fraction(1)})
        return cls(constant=value)

    def copy(self) -> LinExpr:
        return LinExpr(self.terms, self.constant)

    def add_term(self, var: Var, coef: Scalar) -> LinExpr:
        """In-place accumulate; returns self for chaining."""
        coef = to_fraction(coef)
        if coef:
            new = self.terms.get(var, Fraction(0)) + coef
            if new:
                self.terms[var] = new
            else:
                self.terms.pop(var, None)
        return self

    def __add__(self, other: ExprLike) -> LinExpr:
        other = LinExpr.of(other)
        out = self.copy()
        for v, c in other.terms.items():
            out.add_term(v, c)
        out.constant += other.constant
        return out

    __radd__ = __add__

    def __neg__(self) -> LinExpr:
        return self * -1

    def __sub__(self, other: ExprLike) -> LinExpr:
        return self + (-LinExpr.of(other))

    def __rsub__(self, other: ExprLike) -> LinExpr:
        return LinExpr.of(other) - self

    def __mul__(self, k: Scalar) -> LinExpr:
        if isinstance(k, (LinExpr, Var)):
            raise ModelError("product of two expressions is not linear")
        k = to_fraction(k)
        if k == 0:
            return LinExpr()
        return LinExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def _cmp(self, other: ExprLike, sense: str) -> Constraint:
        diff = self - LinExpr.of(other)
        return Constraint(tuple((c, v) for v, c in diff.terms.items()), sense, -diff.constant)

    def __le__(self, other):
        return self._cmp(other, "<=")

    def __ge__(self, other):
        return self._cmp(other, ">=")

    def __eq__(self, other):  # type: ignore[override]
        return self._cmp(other, "=")

    def value(self, assignment: Mapping[Var, Fraction]) -> Fraction:
        return self.constant + sum((c * to_fraction(assignment.get(v, 0)) for v, c in self.terms.items()),
                                   Fraction(0))

    def __repr__(self):
        body = " + ".join(f"{c}*{v.name}" for v, c in self.terms.items()) or "0"
        return f"LinExpr({body} + {self.constant})"


def lin_sum(items: Iterable[ExprLike]) -> LinExpr:
    out = LinExpr()
    for it in items:
        it = LinExpr.of(it)
        for v, c in it.terms.items():
            out.add_term(v, c)
        out.constant += it.constant
    return out


@dataclass(frozen=True)
class Constraint:
    """``sum(coef * var) <sense> rhs``; terms are coalesced, zero terms dropped."""

    terms: tuple[tuple[Fraction, Var], ...]
    sense: str
    rhs: Fraction
    name: str = ""

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise ModelError(f"bad sense {self.sense!r}")
        merged: dict[Var, Fraction] = {}
        for c, v in self.terms:
            merged[v] = merged.get(v, Fraction(0)) + to_fraction(c)
        object.__setattr__(self, "terms", tuple((c, v) for v, c in merged.items() if c != 0))
        object.__setattr__(self, "rhs", to_fraction(self.rhs))

    def lhs_value(self, assignment: Mapping[Var, Fraction]) -> Fraction:
        return sum((c * to_fraction(assignment.get(v, 0)) for c, v in self.terms), Fraction(0))

    def satisfied(self, assignment: Mapping[Var, Fraction], tol: float = 0) -> bool:
        lhs = self.lhs_value(assignment)
        if self.sense == "<=":
            return lhs <= self.rhs + Fraction(tol)
        if self.sense == ">=":
            return lhs >= self.rhs - Fraction(tol)
        return abs(lhs - self.rhs) <= Fraction(tol)


_LP_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\[\]]*")
_RESERVED = {"st", "s.t.", "subject", "bounds", "bound", "end", "free", "inf", "infinity",
             "generals", "general", "gen", "binaries", "binary", "bin", "minimize", "maximize",
             "min", "max"}


def check_lp_name(name: str) -> None:
    if not name:
        raise ModelError("unnamed variable")
    if not _LP_NAME.fullmatch(name) or name.lower() in _RESERVED or re.match(r"[eE]\d", name):
        raise ModelError(f"name {name!r} is not LP-safe")


@dataclass
class Objective:
    sense: str = "feasibility"  # maximize | minimize | feasibility
    expr: LinExpr = field(default_factory=LinExpr)


class Model:
    """Mutable MILP builder. Variables and constraints keep declaration order."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Var] = []
        self.constraints: list[Constraint] = []
        self.objective = Objective()
        self._names: dict[str, Var] = {}

    # -- variables -------------------------------------------------------------------

    def add_var(self, name: str, kind: VarKind | str = VarKind.CONTINUOUS,
                lower: Scalar | None = 0, upper: Scalar | None = None) -> Var:
        kind = VarKind(kind)
        check_lp_name(name)
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        lo = None if lower is None or lower == float("-inf") else to_fraction(lower)
        hi = None if upper is None or upper == float("inf") else to_fraction(upper)
        if kind is VarKind.BINARY:
            lo, hi = Fraction(0), Fraction(1)
        if lo is not None and hi is not None and lo > hi:
            raise ModelError(f"{name}: lower bound {lo} above upper bound {hi}")
        var = Var(len(self.variables), name, kind, lo, hi)
        self.variables.append(var)
        self._names[name] = var
        return var

    def binary(self, name: str) -> Var:
        return self.add_var(name, VarKind.BINARY)

    def integer(self, name: str, lower: Scalar | None, upper: Scalar | None) -> Var:
        return self.add_var(name, VarKind.INTEGER, lower, upper)

    def continuous(self, name: str, lower: Scalar | None = None, upper: Scalar | None = None) -> Var:
        return self.add_var(name, VarKind.CONTINUOUS, lower, upper)

    def var(self, name: str) -> Var:
        return self._names[name]

    def fresh_name(self, stem: str) -> str:
        """``stem`` itself, or ``stem_k`` for the first free ``k``."""
        if stem not in self._names:
            return stem
        k = 1
        while f"{stem}_{k}" in self._names:
            k += 1
        return f"{stem}_{k}"

    # -- constraints -----------------------------------------------------------------

    def add(self, constraint: Constraint, name: str = "") -> Constraint:
        for _, v in constraint.terms:
            if v.index >= len(self.variables) or self.variables[v.index] is not v:
                raise ModelError(f"variable {v.name} does not belong to this model")
        if not constraint.terms:
            # constant row: nothing to emit, but an unsatisfiable one is a modelling bug
            if not constraint.satisfied({}):
                raise ModelError(f"constant constraint 0 {constraint.sense} {constraint.rhs} is infeasible")
            return constraint
        if name:
            constraint = Constraint(constraint.terms, constraint.sense, constraint.rhs, name)
        self.constraints.append(constraint)
        return constraint

    def fix(self, var: Var, value: Scalar) -> Constraint:
        return self.add(LinExpr.of(var) == value)

    def maximize(self, expr: ExprLike) -> None:
        self.objective = Objective("maximize", LinExpr.of(expr).copy())

    def minimize(self, expr: ExprLike) -> None:
        self.objective = Objective("minimize", LinExpr.of(expr).copy())

    def feasibility(self) -> None:
        self.objective = Objective()

    # -- inspection ------------------------------------------------------------------

    def counts(self) -> dict[str, int]:
        kinds = [v.kind for v in self.variables]
        return {
            "constraints": len(self.constraints),
            "variables": len(kinds),
            "binary": kinds.count(VarKind.BINARY),
            "integer": kinds.count(VarKind.INTEGER),
            "continuous": kinds.count(VarKind.CONTINUOUS),
        }

    def violations(self, assignment: Mapping[Var, Scalar], tol: float = 0) -> list[str]:
        """Human-readable list of every bound, integrality and row violation."""
        vals = {v: to_fraction(assignment.get(v, 0)) for v in self.variables}
        tol_f = Fraction(tol)
        out = []
        for v in self.variables:
            x = vals[v]
            if v.lower is not None and x < v.lower - tol_f:
                out.append(f"{v.name}={x} below {v.lower}")
            if v.upper is not None and x > v.upper + tol_f:
                out.append(f"{v.name}={x} above {v.upper}")
            if v.is_integral and abs(x - round(x)) > tol_f:
                out.append(f"{v.name}={x} not integral")
        for i, c in enumerate(self.constraints):
            if not c.satisfied(vals, tol):
                out.append(f"row {c.name or i}: {c.lhs_value(vals)} {c.sense} {c.rhs}")
        return out

    def is_feasible(self, assignment: Mapping[Var, Scalar], tol: float = 0) -> bool:
        return not self.violations(assignment, tol)

    # -- serialisation ---------------------------------------------------------------

    def write_lp(self) -> str:
        return write_lp(self)


def _row_name(i: int, c: Constraint) -> str:
    return c.name or f"R{i}"


def _format_terms(terms: Iterable[tuple[Fraction, Var]], per_line: int = 8) -> list[str]:
    chunks, line = [], []
    first = True
    for coef, var in terms:
        mag = abs(coef)
        num = "" if mag == 1 else format_number(mag) + " "
        if first:
            line.append(f"{'-' if coef < 0 else ''}{num}{var.name}")
            first = False
        else:
            line.append(f"{'-' if coef < 0 else '+'} {num}{var.name}")
        if len(line) == per_line:
            chunks.append(" ".join(line))
            line = []
    if line:
        chunks.append(" ".join(line))
    return chunks


def write_lp(model: Model) -> str:
    """CPLEX-style LP text, deterministic in declaration order.

    The objective constant is dropped (LP has no slot for it); feasibility
    models are written as ``Minimize obj: 0``.
    """
    row_names = set()
    for i, c in enumerate(model.constraints):
        name = _row_name(i, c)
        check_lp_name(name)
        if name in row_names or name in model._names:
            raise ModelError(f"name collision on row {name!r}")
        row_names.add(name)
    seen = set()
    for v in model.variables:
        check_lp_name(v.name)
        if v.name in seen:
            raise ModelError(f"name collision on variable {v.name!r}")
        seen.add(v.name)

    out = [f"\\ {model.name}"]
    obj = model.objective
    out.append("Maximize" if obj.sense == "maximize" else "Minimize")
    terms = [(c, v) for v, c in obj.expr.terms.items()] if obj.sense != "feasibility" else []
    lines = _format_terms(terms)
    if lines:
        out.append(f" obj: {lines[0]}")
        out.extend(f"   {ln}" for ln in lines[1:])
    else:
        out.append(" obj: 0")
    out.append("Subject To")
    for i, c in enumerate(model.constraints):
        sense = "=" if c.sense == "=" else c.sense
        lines = _format_terms(c.terms)
        if not lines:
            # constant row: keep it so infeasible constants still surface
            if not model.variables:
                raise ModelError("constant constraint in a model without variables")
            lines = [f"0 {model.variables[0].name}"]
        out.append(f" {_row_name(i, c)}: {lines[0]}")
        out.extend(f"   {ln}" for ln in lines[1:])
        out[-1] += f" {sense} {format_number(c.rhs)}"
    out.append("Bounds")
    for v in model.variables:
        if v.kind is VarKind.BINARY:
            continue
        lo, hi = v.lower, v.upper
        if lo is None and hi is None:
            out.append(f" {v.name} free")
        elif lo is None:
            out.append(f" -inf <= {v.name} <= {format_number(hi)}")
        elif hi is None:
            if lo != 0:
                out.append(f" {v.name} >= {format_number(lo)}")
        else:
            out.append(f" {format_number(lo)} <= {v.name} <= {format_number(hi)}")
    generals = [v.name for v in model.variables if v.kind is VarKind.INTEGER]
    binaries = [v.name for v in model.variables if v.kind is VarKind.BINARY]
    for title, names in (("Generals", generals), ("Binaries", binaries)):
        if names:
            out.append(title)
            for k in range(0, len(names), 10):
                out.append(" " + " ".join(names[k:k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"
