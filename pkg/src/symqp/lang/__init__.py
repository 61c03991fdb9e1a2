"""Modelling language for first-order logical quadratic programs."""

from .compiler import CompileError, Layout, QpStandard, compile
from .grounding import BitBudgetError, GroundQp, ground
from .logic import QuantifierError, propositionalize, simplify
from .parser import FoqpSyntaxError, parse
from .syntax import Foqp, to_source

__all__ = [
    "parse",
    "propositionalize",
    "simplify",
    "compile",
    "ground",
    "to_source",
    "Foqp",
    "QpStandard",
    "Layout",
    "GroundQp",
    "FoqpSyntaxError",
    "QuantifierError",
    "CompileError",
    "BitBudgetError",
]
