import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TWO_PRED, TWO_PRED_STATES, P, Q, naive_chi, random_formula, random_predicate, \
    random_states
from trstl.stl import (Always, And, Eventually, FormulaError, HorizonError, Interval,
                       LinearPredicate, Not, Or, ParseError, Predicate, Trajectory, Until,
                       char_function, expand_derived, format_formula, formula_horizon,
                       parse_formula, predicates)


def pred(coeffs, offset):
    return Predicate(LinearPredicate(tuple(Fraction(c) for c in coeffs), Fraction(offset)))


class TestParse:
    def test_uav_always(self):
        phi = parse_formula("G[20,30] (z >= 20)", ["z", "vz"])
        assert phi == Always(Interval(20, 30), pred([1, 0], -20))

    def test_single_predicate(self):
        assert parse_formula("x >= 0.1", ["x"]) == pred([1], Fraction(-1, 10))

    def test_le_negates(self):
        assert parse_formula("x <= 0.5", ["x"]) == pred([-1], Fraction(1, 2))

    def test_until(self):
        phi = parse_formula("((x >= 0) U[0,2] (x <= 1))", ["x"])
        assert phi == Until(pred([1], 0), Interval(0, 2), pred([-1], 1))

    def test_linear_expression(self):
        phi = parse_formula("2*x - y + 0.5 >= 1", ["x", "y"])
        assert phi == pred([2, -1], Fraction(-1, 2))

    def test_precedence(self):
        phi = parse_formula("!x >= 0 & y >= 0 | x >= 1", ["x", "y"])
        assert isinstance(phi, Or)
        assert isinstance(phi.args[0], And)
        assert isinstance(phi.args[0].args[0], Not)

    def test_nary_flattening(self):
        phi = parse_formula("x >= 0 & (x >= 1 & x >= 2)", ["x"])
        assert isinstance(phi, And) and len(phi.args) == 3

    @pytest.mark.parametrize("text, fragment", [
        ("x >= ", "expected"),
        ("w >= 1", "unknown variable"),
        ("G[3,1] x >= 0", "empty interval"),
        ("G[-1,2] x >= 0", "negative"),
        ("G[0,1.5] x >= 0", "not an integer"),
        ("(p) U[0,2] (q)", "not supported"),
        ("0*x >= 0", "degenerate"),
    ])
    def test_errors(self, text, fragment):
        with pytest.raises(FormulaError, match=fragment):
            parse_formula(text, ["x"])

    def test_error_position(self):
        with pytest.raises(ParseError) as err:
            parse_formula("x >= 1 & y >= 2", ["x"])
        assert err.value.pos == 9

    def test_variables_named_like_operators(self):
        phi = parse_formula("G >= 1 & G[0,1] F >= 0", ["G", "F"])
        assert phi == And((pred([1, 0], -1), Always(Interval(0, 1), pred([0, 1], 0))))


@st.composite
def formulas(draw, depth=3):
    rng = random.Random(draw(st.integers(0, 2**32)))
    preds = [random_predicate(rng, 2) for _ in range(3)]
    return random_formula(rng, draw(st.integers(0, depth)), preds)


@given(formulas())
def test_round_trip(phi):
    text = format_formula(phi, ["a", "b"])
    assert parse_formula(text, ["a", "b"]) == phi


class TestHorizon:
    def test_uav(self):
        phi = And((Always(Interval(20, 30), P), Always(Interval(60, 70), Q)))
        assert formula_horizon(phi) == 70

    def test_predicate(self):
        assert formula_horizon(P) == 0

    def test_nested(self):
        assert formula_horizon(Always(Interval(0, 10), Eventually(Interval(0, 10), P))) == 20

    def test_until_uses_both_sides(self):
        phi = Until(Eventually(Interval(0, 4), P), Interval(1, 3), Q)
        assert formula_horizon(phi) == 7


class TestCharFunction:
    def test_two_predicate_or(self):
        assert char_function(P | Q, TWO_PRED, 3) == 1
        assert char_function(P | Q, TWO_PRED, 6) == -1

    def test_contradiction(self):
        phi = P & Not(P)
        assert all(char_function(phi, TWO_PRED, t) == -1 for t in range(8))

    def test_sign_of_zero_is_positive(self):
        traj = Trajectory(np.array([[0.0]]))
        assert char_function(pred([1], 0), traj, 0) == 1
        assert char_function(pred([-1], 0), traj, 0) == 1

    def test_until_empty_prefix(self):
        # at t' = t the left operand is not consulted
        traj = Trajectory(np.array([[1.0, -1.0]]))
        assert char_function(Until(Q, Interval(0, 0), P), traj, 0) == 1

    def test_horizon_violation(self):
        with pytest.raises(HorizonError):
            char_function(Always(Interval(0, 3), P), TWO_PRED, 5)


@settings(max_examples=200)
@given(st.integers(0, 2**32))
def test_semantic_properties(seed):
    rng = random.Random(seed)
    preds = [random_predicate(rng, 2) for _ in range(3)]
    a, b = random_formula(rng, 2, preds), random_formula(rng, 2, preds)
    states = random_states(rng, 10, 2)
    traj = Trajectory(states)
    for phi in (a, Not(And((a, b)))):
        for t in range(0, traj.horizon - formula_horizon(phi) + 1):
            chi = char_function(phi, traj, t)
            assert chi in (1, -1)
            assert chi == naive_chi(phi, states, t)
            assert chi == char_function(expand_derived(phi), traj, t)
    for t in range(0, traj.horizon - max(formula_horizon(a), formula_horizon(b)) + 1):
        assert char_function(Not(And((a, b))), traj, t) == char_function(Or((Not(a), Not(b))), traj, t)


def test_predicates_deduplicated():
    phi = parse_formula("x >= 0 & F[0,1] x >= 0 | x <= 1", ["x"])
    assert len(predicates(phi)) == 2


def test_trajectory_is_read_only():
    with pytest.raises(ValueError):
        TWO_PRED.states[0, 0] = 5.0
    assert TWO_PRED.horizon == len(TWO_PRED_STATES) - 1
