"""Time-robust signal temporal logic: exact monitoring and MILP control synthesis."""

from .encoder import EncoderConfig, TimeRobustEncoder, encode_formula
from .monitor import robustness_profile, theta_minus_predicate, theta_plus_predicate, time_robustness
from .scenario import Scenario, bundled_scenarios, load_scenario
from .stl import (Always, And, Eventually, Interval, LinearPredicate, Not, Or, Predicate, Trajectory,
                  Until, char_function, format_formula, formula_horizon, parse_formula)
from .synthesis import (LtiSystem, SynthesisProblem, SynthesisResult, simulate, synthesize,
                        time_robust_control)

__all__ = [
    "Always", "And", "EncoderConfig", "Eventually", "Interval", "LinearPredicate", "LtiSystem",
    "Not", "Or", "Predicate", "Scenario", "SynthesisProblem", "SynthesisResult", "TimeRobustEncoder",
    "Trajectory", "Until", "bundled_scenarios", "char_function", "encode_formula", "format_formula",
    "formula_horizon", "load_scenario", "parse_formula", "robustness_profile", "simulate",
    "synthesize", "theta_minus_predicate", "theta_plus_predicate", "time_robust_control",
    "time_robustness",
]
