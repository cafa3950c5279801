"""Symbolic regression via genetic programming under an edge-complexity
budget, with linear baselines, symbolic calculus and dataset tooling."""

from .expressions import (
    Binary,
    CategoryMap,
    Constant,
    Expression,
    Feature,
    OperatorSet,
    Schema,
    ColumnSpec,
    Unary,
    default_operator_set,
    evaluate,
    random_tree,
)
from .graphs import complexity, to_dot
from .parsing import ModelDocument, load_model, parse, print_expression, save_model

__all__ = [
    "Binary",
    "CategoryMap",
    "Constant",
    "Expression",
    "Feature",
    "OperatorSet",
    "Schema",
    "ColumnSpec",
    "Unary",
    "default_operator_set",
    "evaluate",
    "random_tree",
    "complexity",
    "to_dot",
    "ModelDocument",
    "load_model",
    "parse",
    "print_expression",
    "save_model",
]

__version__ = "0.1.0"
