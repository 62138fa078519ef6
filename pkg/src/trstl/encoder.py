"""MILP encoding of right/left time robustness.

Predicates use run-length counters over the whole horizon::

    c1_t = (c1_{t+1} + 1) * z_t         c1_{H+1} = 0
    c0_t = (c0_{t+1} - 1) * (1 - z_t)   c0_{H+1} = 0
    theta_t = c1_t + c0_t - (2 z_t - 1)

with each product linearised by :func:`add_bool_int_product`. The left side
runs the same recursion forward from ``c_{-1} = 0``. Operators are encoded
on the smallest window of time steps their parent needs, using big-M min/max
selectors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .milp import LinExpr, Model, Var, add_bool_int_product, add_indicator, add_max, add_min
from .monitor import Side, _check_side
from .stl import (Always, And, Eventually, Formula, LinearPredicate, Not, Or, Predicate, Until,
                  format_formula, formula_horizon, to_fraction)

Window = tuple[int, int]
Box = Sequence[tuple[Fraction | float | None, Fraction | float | None]]


class EncodingError(ValueError):
    pass


def bounds_for_predicate(p: LinearPredicate, box: Box) -> tuple[Fraction, Fraction]:
    """Exact ``(max, min)`` of ``mu`` over an axis-aligned box."""
    if len(box) != p.dim:
        raise EncodingError(f"box has {len(box)} dimensions, predicate has {p.dim}")
    hi = lo = p.offset
    for i, (c, (lb, ub)) in enumerate(zip(p.coeffs, box)):
        if c == 0:
            continue
        if lb is None or ub is None or abs(float(lb)) == float("inf") or abs(float(ub)) == float("inf"):
            raise EncodingError(f"state dimension {i} is unbounded but appears in a predicate")
        lb, ub = to_fraction(lb), to_fraction(ub)
        hi += c * ub if c > 0 else c * lb
        lo += c * lb if c > 0 else c * ub
    return hi, lo


@dataclass
class EncoderConfig:
    """``margin`` shifts the predicate threshold used inside the MILP.

    With ``margin > 0`` the solver must place satisfied states at
    ``mu >= margin`` and violated ones at ``mu <= margin - eps``, keeping
    every decision at least ``min(margin, eps - margin)`` away from the true
    boundary so that solver round-off cannot flip a sign.
    """

    horizon: int
    box: Box
    eps: Fraction = Fraction(1, 10_000)
    side: Side = "right"
    margin: Fraction = Fraction(0)

    def __post_init__(self):
        self.eps = to_fraction(self.eps)
        self.margin = to_fraction(self.margin)
        if self.eps <= 0:
            raise EncodingError("eps must be positive")
        if not 0 <= self.margin < self.eps:
            raise EncodingError("margin must lie in [0, eps)")
        if self.horizon < 0:
            raise EncodingError("negative horizon")
        _check_side(self.side)

    @property
    def big_m(self) -> int:
        # every theta lies in [-(H+1), H+1]
        return 2 * (self.horizon + 2)


@dataclass
class EncodedNode:
    node: Formula
    node_id: str
    side: Side
    window: Window
    theta: dict[int, Var] = field(default_factory=dict)
    z: dict[int, Var] = field(default_factory=dict)
    c1: dict[int, Var] = field(default_factory=dict)
    c0: dict[int, Var] = field(default_factory=dict)

    @property
    def is_predicate(self) -> bool:
        return isinstance(self.node, Predicate)

    def theta_values(self, assignment) -> dict[int, int]:
        return {t: int(assignment[v]) for t, v in sorted(self.theta.items())}


def needed_window(node: Formula, window: Window, horizon: int) -> list[Window]:
    """Time windows each child must be encoded on so that ``node`` is defined on ``window``."""
    t_min, t_max = window
    if t_min < 0 or t_max < t_min:
        raise EncodingError(f"bad window {window}")
    if t_max + formula_horizon(node) > horizon:
        raise EncodingError(f"window {window} of {type(node).__name__} exceeds horizon {horizon}")
    if isinstance(node, Predicate):
        return []
    if isinstance(node, (Not, And, Or)):
        return [window] * len(node.children())
    if isinstance(node, (Always, Eventually)):
        a, b = node.interval.lo, node.interval.hi
        return [(t_min + a, t_max + b)]
    if isinstance(node, Until):
        a, b = node.interval.lo, node.interval.hi
        # left operand is needed on [t, t'-1] for t' up to t+b; b = 0 leaves it unused
        left = (t_min, t_max + b - 1) if b > 0 else None
        return [left, (t_min + a, t_max + b)]
    raise TypeError(f"not a formula: {node!r}")


def encode_predicate(model: Model, p: LinearPredicate, state: Sequence[Sequence], config: EncoderConfig,
                     node_id: str = "p", node: Formula | None = None) -> EncodedNode:
    """Counter encoding of theta for ``p`` at every ``t`` in ``[0, H]``.

    ``state[t]`` holds the symbolic state ``x_t`` (variables or expressions).
    """
    H = config.horizon
    if len(state) != H + 1:
        raise EncodingError(f"expected {H + 1} symbolic states, got {len(state)}")
    M, m = bounds_for_predicate(p, config.box)
    shift = config.margin
    enc = EncodedNode(node if node is not None else Predicate(p), node_id, config.side, (0, H))
    for t in range(H + 1):
        x_t = state[t]
        mu = LinExpr(constant=p.offset - shift)
        for c, xi in zip(p.coeffs, x_t):
            mu = mu + LinExpr.of(xi) * c
        z = enc.z[t] = model.binary(f"z_{node_id}_{t}")
        add_indicator(model, mu, z, M - shift, m - shift, config.eps)

    right = config.side == "right"
    order = range(H, -1, -1) if right else range(H + 1)
    prev1: LinExpr | Var = LinExpr()  # c_{H+1} or c_{-1}
    prev0: LinExpr | Var = LinExpr()
    for t in order:
        run = H + 1 - t if right else t + 1  # longest run that can start/end at t
        z = enc.z[t]
        c1 = enc.c1[t] = model.integer(f"c1_{node_id}_{t}", 0, run)
        c0 = enc.c0[t] = model.integer(f"c0_{node_id}_{t}", -run, 0)
        add_bool_int_product(model, c1, z, LinExpr.of(prev1) + 1, 1, run)
        add_bool_int_product(model, c0, 1 - LinExpr.of(z), LinExpr.of(prev0) - 1, -run, -1)
        th = enc.theta[t] = model.integer(f"th_{node_id}_{t}", -(H + 1), H + 1)
        model.add(LinExpr.of(th) == c1 + c0 - (2 * LinExpr.of(z) - 1))
        prev1, prev0 = c1, c0
    enc.c1 = dict(sorted(enc.c1.items()))
    enc.c0 = dict(sorted(enc.c0.items()))
    return enc


def encode_operator(model: Model, node: Formula, children: Sequence[EncodedNode | None], window: Window,
                    config: EncoderConfig, node_id: str = "n") -> EncodedNode:
    """theta of a non-predicate node on ``window`` from its already encoded children."""
    H = config.horizon
    big_m = config.big_m
    enc = EncodedNode(node, node_id, config.side, window)

    def child_theta(k: int, t: int) -> Var:
        ch = children[k]
        if ch is None or t not in ch.theta:
            raise EncodingError(f"child {k} of {node_id} is not encoded at t={t}")
        return ch.theta[t]

    for t in range(window[0], window[1] + 1):
        th = enc.theta[t] = model.integer(f"th_{node_id}_{t}", -(H + 1), H + 1)
        stem = f"b_{node_id}_{t}"
        if isinstance(node, Not):
            model.add(LinExpr.of(th) == -LinExpr.of(child_theta(0, t)))
        elif isinstance(node, And):
            add_min(model, th, [child_theta(k, t) for k in range(len(node.args))], big_m, stem)
        elif isinstance(node, Or):
            add_max(model, th, [child_theta(k, t) for k in range(len(node.args))], big_m, stem)
        elif isinstance(node, Always):
            rs = [child_theta(0, t + k) for k in range(node.interval.lo, node.interval.hi + 1)]
            add_min(model, th, rs, big_m, stem)
        elif isinstance(node, Eventually):
            rs = [child_theta(0, t + k) for k in range(node.interval.lo, node.interval.hi + 1)]
            add_max(model, th, rs, big_m, stem)
        elif isinstance(node, Until):
            candidates = []
            for tp in range(t + node.interval.lo, t + node.interval.hi + 1):
                items = [child_theta(1, tp)] + [child_theta(0, tpp) for tpp in range(t, tp)]
                if len(items) == 1:
                    candidates.append(items[0])
                    continue
                aux = model.integer(f"u_{node_id}_{t}_{tp}", -(H + 1), H + 1)
                add_min(model, aux, items, big_m, f"bu_{node_id}_{t}_{tp}")
                candidates.append(aux)
            add_max(model, th, candidates, big_m, stem)
        else:
            raise TypeError(f"cannot encode {node!r} as an operator")
    return enc


class TimeRobustEncoder:
    """Encodes formulas against one symbolic trajectory in one model.

    Predicate encodings are shared between occurrences of the same predicate.
    """

    def __init__(self, model: Model, state: Sequence[Sequence], config: EncoderConfig):
        if len(state) != config.horizon + 1:
            raise EncodingError(f"expected {config.horizon + 1} symbolic states, got {len(state)}")
        self.model = model
        self.state = state
        self.config = config
        self.nodes: list[EncodedNode] = []
        self._preds: dict[LinearPredicate, EncodedNode] = {}

    def encode(self, phi: Formula, window: Window = (0, 0)) -> EncodedNode:
        children_windows = needed_window(phi, window, self.config.horizon)
        if isinstance(phi, Predicate):
            enc = self._preds.get(phi.pred)
            if enc is None:
                enc = encode_predicate(self.model, phi.pred, self.state, self.config,
                                       f"p{len(self._preds)}", phi)
                self._preds[phi.pred] = enc
                self.nodes.append(enc)
            return enc
        children = [self.encode(ch, w) if w is not None else None
                    for ch, w in zip(phi.children(), children_windows)]
        enc = encode_operator(self.model, phi, children, window, self.config, f"n{len(self.nodes)}")
        self.nodes.append(enc)
        return enc

    def debug_rows(self) -> list[tuple[str, int, str, str]]:
        rows = []
        for enc in self.nodes:
            for role in ("theta", "z", "c1", "c0"):
                for t, v in sorted(getattr(enc, role).items()):
                    rows.append((enc.node_id, t, role, v.name))
        return rows

    def write_debug_csv(self, path: str | Path, var_names: Sequence[str] | None = None) -> None:
        """One row per encoding variable: ``node_id, t, role, variable, formula``."""
        labels = {}
        for enc in self.nodes:
            labels[enc.node_id] = format_formula(enc.node, var_names) if var_names else type(enc.node).__name__
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "t", "role", "variable", "formula"])
            for node_id, t, role, name in self.debug_rows():
                w.writerow([node_id, t, role, name, labels[node_id]])


def encode_formula(model: Model, phi: Formula, state: Sequence[Sequence],
                   config: EncoderConfig) -> tuple[EncodedNode, TimeRobustEncoder]:
    """Encode ``phi`` at ``t = 0``; returns the root node and the encoder."""
    if formula_horizon(phi) > config.horizon:
        raise EncodingError(f"formula horizon {formula_horizon(phi)} exceeds H={config.horizon}")
    encoder = TimeRobustEncoder(model, state, config)
    return encoder.encode(phi, (0, 0)), encoder
