"""MILP intermediate representation, big-M gadgets and external solver adapters."""

from .gadgets import add_bool_int_product, add_indicator, add_max, add_min, expr_bounds
from .model import (Constraint, LinExpr, Model, ModelError, Objective, Var, VarKind, lin_sum,
                    write_lp)
from .solvers import (SolverConfig, SolverError, SolverOutcome, find_cbc, parse_cbc_solution,
                      parse_highs_solution, solve)

__all__ = [
    "Constraint", "LinExpr", "Model", "ModelError", "Objective", "SolverConfig", "SolverError",
    "SolverOutcome", "Var", "VarKind", "add_bool_int_product", "add_indicator", "add_max",
    "add_min", "expr_bounds", "find_cbc", "lin_sum", "parse_cbc_solution",
    "parse_highs_solution", "solve", "write_lp",
]
