"""Symbolic expression core: parse, differentiate, substitute, evaluate."""
from .calculus import (
    JetContext, JetError, PLACEHOLDER, pdiff, replace_functions, substitute, total_derivative,
)
from .evaluate import (
    EvaluationError, StandIn, ZeroTest, evaluate, is_zero, sample_points, standin_family,
)
from .nodes import (
    Add, Call, Div, Expr, Func, Mul, Neg, Num, Pow, Var, ONE, ZERO,
    add, as_expr, call, cos, div, exp, func, function_names, ln, mul, neg, power, sin, sqrt,
    sub, tan,
)
from .parser import ParseError, parse

__all__ = [
    "Add", "Call", "Div", "EvaluationError", "Expr", "Func", "JetContext", "JetError", "Mul",
    "Neg", "Num", "ONE", "PLACEHOLDER", "ParseError", "Pow", "StandIn", "Var", "ZERO",
    "ZeroTest", "add", "as_expr", "call", "cos", "div", "evaluate", "exp", "func",
    "function_names", "is_zero", "ln", "mul", "neg", "parse", "pdiff", "power",
    "replace_functions", "sample_points", "sin", "sqrt", "standin_family", "sub",
    "substitute", "tan", "total_derivative",
]
