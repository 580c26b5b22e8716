"""Operator calculus on jet spaces for recursion operators of integrable PDEs."""

from .expr import Expression, simplify, substitute, diff
from .dsl import ParseError, SymbolTable, parse
from .jets import Context, PDESystem, make_system, normal_form, total_derivative, linearize
from .operators import TDOperator, compose, commutator, adjoint, apply_to, lambda_split

__all__ = [
    "Expression", "simplify", "substitute", "diff",
    "ParseError", "SymbolTable", "parse",
    "Context", "PDESystem", "make_system", "normal_form", "total_derivative", "linearize",
    "TDOperator", "compose", "commutator", "adjoint", "apply_to", "lambda_split",
]

__version__ = "0.1.0"
