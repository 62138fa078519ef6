"""Big-M constraint builders: predicate indicators, binary-integer products, min and max."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..stl import to_fraction
from .model import ExprLike, LinExpr, Model, ModelError, Scalar, Var, lin_sum


def add_indicator(model: Model, mu: ExprLike, z: Var, M: Scalar, m: Scalar, eps: Scalar) -> None:
    """Tie binary ``z`` to the sign of ``mu``: ``z = 1 -> mu >= 0`` and ``z = 0 -> mu <= -eps``.

    ``M``/``m`` must over/under-estimate ``mu`` on the feasible domain. Points
    with ``mu`` strictly inside ``(-eps, 0)`` are cut off.
    """
    M, m, eps = to_fraction(M), to_fraction(m), to_fraction(eps)
    if eps <= 0:
        raise ModelError("eps must be positive")
    if M < m:
        raise ModelError(f"M={M} below m={m}")
    mu = LinExpr.of(mu)
    model.add(mu <= (M + eps) * LinExpr.of(z) - eps)
    model.add(mu >= m * (1 - LinExpr.of(z)))


def add_bool_int_product(model: Model, y: ExprLike, b: ExprLike, x: ExprLike,
                         x_l: Scalar, x_u: Scalar) -> None:
    """Force ``y = b * x`` given ``x_l <= x <= x_u``; ``b`` may be a 0/1 expression such as ``1 - z``."""
    x_l, x_u = to_fraction(x_l), to_fraction(x_u)
    if x_l > x_u:
        raise ModelError(f"x_l={x_l} above x_u={x_u}")
    y, x, bb = LinExpr.of(y), LinExpr.of(x), LinExpr.of(b)
    model.add(y >= x_l * bb)
    model.add(y <= x_u * bb)
    model.add(y >= x - x_u * (1 - bb))
    model.add(y <= x - x_l * (1 - bb))


def _selector(model: Model, r: Var, rs: Sequence[ExprLike], big_m: Scalar, prefix: str,
              is_min: bool) -> list[Var]:
    if not rs:
        raise ModelError("min/max of an empty list")
    big_m = to_fraction(big_m)
    stem = prefix or f"sel_{r.name}"
    if len(rs) == 1:
        model.add(LinExpr.of(r) == rs[0])
        return []
    bs = [model.binary(model.fresh_name(f"{stem}_{i}")) for i in range(len(rs))]
    for ri, bi in zip(rs, bs):
        ri = LinExpr.of(ri)
        if is_min:
            model.add(LinExpr.of(r) <= ri)
            model.add(LinExpr.of(r) >= ri - big_m * (1 - LinExpr.of(bi)))
        else:
            model.add(LinExpr.of(r) >= ri)
            model.add(LinExpr.of(r) <= ri + big_m * (1 - LinExpr.of(bi)))
    model.add(lin_sum(bs) == 1)
    return bs


def add_min(model: Model, r: Var, rs: Sequence[ExprLike], big_m: Scalar, prefix: str = "") -> list[Var]:
    """``r = min(rs)``: ``r_i - M(1-b_i) <= r <= r_i`` with one selector ``b_i`` set.

    A single operand is a plain equality and needs no selector. Returns the
    selector binaries.
    """
    return _selector(model, r, rs, big_m, prefix, True)


def add_max(model: Model, r: Var, rs: Sequence[ExprLike], big_m: Scalar, prefix: str = "") -> list[Var]:
    """``r = max(rs)``, dual of :func:`add_min`."""
    return _selector(model, r, rs, big_m, prefix, False)


def expr_bounds(expr: ExprLike) -> tuple[Fraction | None, Fraction | None]:
    """Interval bounds of ``expr`` from its variables' bounds (``None`` = unbounded)."""
    expr = LinExpr.of(expr)
    lo: Fraction | None = expr.constant
    hi: Fraction | None = expr.constant
    for v, c in expr.terms.items():
        a, b = (v.lower, v.upper) if c > 0 else (v.upper, v.lower)
        lo = None if lo is None or a is None else lo + c * a
        hi = None if hi is None or b is None else hi + c * b
    return lo, hi
