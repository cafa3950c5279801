"""Expression trees: the model language, schemas, evaluation and random generation.

An expression is an immutable tree of constants, feature references,
categorical lookups and operator applications.  Trees evaluate row-wise over
column-oriented datasets and are the objects evolved by the GP engine and
manipulated by the calculus tooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expression",
    "Constant",
    "Feature",
    "CategoryMap",
    "Unary",
    "Binary",
    "OperatorSet",
    "ColumnSpec",
    "Schema",
    "UNARY_OPS",
    "BINARY_OPS",
    "default_operator_set",
    "ExpressionError",
    "UnboundFeature",
    "DomainError",
    "EmptyOperatorSet",
    "evaluate",
    "invalid_rows",
    "check_bound",
    "random_tree",
    "node_count",
    "depth",
    "walk",
    "subtree_at",
    "replace_at",
    "all_paths",
    "features_of",
]


class ExpressionError(Exception):
    """Base class for expression-level failures."""


class UnboundFeature(ExpressionError):
    """A feature or category column named by the tree is missing from the schema."""

    def __init__(self, name: str):
        super().__init__(f"column {name!r} is not available in the bound schema")
        self.name = name


class DomainError(ExpressionError):
    """Evaluation produced non-finite values on some rows (strict mode only)."""

    def __init__(self, rows: Sequence[int]):
        rows = list(rows)
        preview = ", ".join(str(r) for r in rows[:8])
        more = "" if len(rows) <= 8 else f", ... ({len(rows)} total)"
        super().__init__(f"non-finite result on rows [{preview}{more}]")
        self.rows = rows


class EmptyOperatorSet(ExpressionError):
    """An internal node was requested but no operators are configured."""


class UnknownCategory(ExpressionError):
    """A categorical value has no entry in the lookup table."""

    def __init__(self, name: str, category: str):
        super().__init__(f"category {category!r} of column {name!r} has no table entry")
        self.name = name
        self.category = category


# ---------------------------------------------------------------------------
# Node types


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError(f"constants must be finite, got {self.value!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Feature:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("feature name must be nonempty")


@dataclass(frozen=True)
class CategoryMap:
    """Lookup of a categorical column: each category maps to a finite real."""

    name: str
    table: tuple[tuple[str, float], ...]

    def __init__(self, name: str, table):
        if not name:
            raise ValueError("category column name must be nonempty")
        if isinstance(table, Mapping):
            items = sorted(table.items())
        else:
            items = sorted((str(k), float(v)) for k, v in table)
        if not items:
            raise ValueError("category table must be nonempty")
        for cat, val in items:
            if not math.isfinite(float(val)):
                raise ValueError(f"category {cat!r} maps to non-finite value {val!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "table", tuple((k, float(v)) for k, v in items))

    @property
    def mapping(self) -> dict[str, float]:
        return dict(self.table)


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expression"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expression"
    right: "Expression"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


Expression = Union[Constant, Feature, CategoryMap, Unary, Binary]

UNARY_OPS = ("neg", "sqrt", "exp", "log", "square", "inv")
BINARY_OPS = ("add", "sub", "mul", "div")


@dataclass(frozen=True)
class OperatorSet:
    """The operator alphabet GP is allowed to emit."""

    unary: tuple[str, ...] = UNARY_OPS
    binary: tuple[str, ...] = BINARY_OPS

    def __post_init__(self):
        unary = tuple(dict.fromkeys(self.unary))
        binary = tuple(dict.fromkeys(self.binary))
        for op in unary:
            if op not in UNARY_OPS:
                raise ValueError(f"unknown unary operator {op!r}")
        for op in binary:
            if op not in BINARY_OPS:
                raise ValueError(f"unknown binary operator {op!r}")
        if not unary and not binary:
            raise ValueError("operator set must be nonempty")
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "binary", binary)

    @property
    def all(self) -> tuple[str, ...]:
        return self.unary + self.binary


def default_operator_set() -> OperatorSet:
    return OperatorSet()


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # "numeric" | "categorical"
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ValueError(f"column kind must be numeric or categorical, got {self.kind!r}")
        if self.kind == "categorical" and not self.categories:
            raise ValueError(f"categorical column {self.name!r} must declare categories")
        object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]

    def __init__(self, columns: Iterable[ColumnSpec]):
        cols = tuple(columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        object.__setattr__(self, "columns", cols)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def __getitem__(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def numeric_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.kind == "numeric")

    def categorical_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.kind == "categorical")


# ---------------------------------------------------------------------------
# Tree utilities


def walk(expr: Expression) -> Iterator[Expression]:
    """Yield every node in pre-order."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Unary):
            stack.append(node.child)
        elif isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)


def node_count(expr: Expression) -> int:
    return sum(1 for _ in walk(expr))


def depth(expr: Expression) -> int:
    """Depth of the tree; a lone terminal has depth 1."""
    if isinstance(expr, Unary):
        return 1 + depth(expr.child)
    if isinstance(expr, Binary):
        return 1 + max(depth(expr.left), depth(expr.right))
    return 1


def all_paths(expr: Expression) -> list[tuple[int, ...]]:
    """Child-index paths of every node in pre-order; the root is ()."""
    out: list[tuple[int, ...]] = []

    def rec(node: Expression, path: tuple[int, ...]):
        out.append(path)
        if isinstance(node, Unary):
            rec(node.child, path + (0,))
        elif isinstance(node, Binary):
            rec(node.left, path + (0,))
            rec(node.right, path + (1,))

    rec(expr, ())
    return out


class InvalidPath(ExpressionError):
    def __init__(self, path):
        super().__init__(f"path {list(path)!r} does not address a node")
        self.path = tuple(path)


def subtree_at(expr: Expression, path: Sequence[int]) -> Expression:
    node = expr
    for i, step in enumerate(path):
        if isinstance(node, Unary) and step == 0:
            node = node.child
        elif isinstance(node, Binary) and step in (0, 1):
            node = node.left if step == 0 else node.right
        else:
            raise InvalidPath(path)
    return node


def replace_at(expr: Expression, path: Sequence[int], replacement: Expression) -> Expression:
    """Rebuild the tree with the node at `path` swapped for `replacement`."""
    if not path:
        return replacement
    step, rest = path[0], path[1:]
    if isinstance(expr, Unary) and step == 0:
        return Unary(expr.op, replace_at(expr.child, rest, replacement))
    if isinstance(expr, Binary) and step == 0:
        return Binary(expr.op, replace_at(expr.left, rest, replacement), expr.right)
    if isinstance(expr, Binary) and step == 1:
        return Binary(expr.op, expr.left, replace_at(expr.right, rest, replacement))
    raise InvalidPath(path)


def features_of(expr: Expression) -> set[str]:
    """Names of all columns the tree reads (features and category lookups)."""
    return {n.name for n in walk(expr) if isinstance(n, (Feature, CategoryMap))}


def check_bound(expr: Expression, schema: Schema) -> None:
    """Verify every name resolves and category tables cover declared categories."""
    for node in walk(expr):
        if isinstance(node, Feature):
            if node.name not in schema:
                raise UnboundFeature(node.name)
            if schema[node.name].kind != "numeric":
                raise UnboundFeature(node.name)
        elif isinstance(node, CategoryMap):
            if node.name not in schema:
                raise UnboundFeature(node.name)
            spec = schema[node.name]
            if spec.kind != "categorical":
                raise UnboundFeature(node.name)
            missing = set(spec.categories) - set(node.mapping)
            if missing:
                raise UnknownCategory(node.name, sorted(missing)[0])


# ---------------------------------------------------------------------------
# Evaluation

_UNARY_FN = {
    "neg": np.negative,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "square": np.square,
    "inv": np.reciprocal,
}

_BINARY_FN = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}


def _eval(expr: Expression, data, n: int) -> np.ndarray:
    if isinstance(expr, Constant):
        return np.full(n, expr.value)
    if isinstance(expr, Feature):
        return np.asarray(data.column(expr.name), dtype=float)
    if isinstance(expr, CategoryMap):
        codes = data.column(expr.name)
        table = expr.mapping
        out = np.empty(len(codes))
        for i, code in enumerate(codes):
            try:
                out[i] = table[code]
            except KeyError:
                raise UnknownCategory(expr.name, str(code)) from None
        return out
    if isinstance(expr, Unary):
        child = _eval(expr.child, data, n)
        if expr.op == "inv":
            # np.reciprocal on integral input is a trap; child is always float here
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return np.divide(1.0, child)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _UNARY_FN[expr.op](child)
    left = _eval(expr.left, data, n)
    right = _eval(expr.right, data, n)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return _BINARY_FN[expr.op](left, right)


def evaluate(expr: Expression, data, strict: bool = False) -> np.ndarray:
    """Row-wise evaluation over a dataset.

    Operators are unprotected: sqrt/log of negatives, division by zero and
    exp overflow leave NaN/inf in the output rather than being silently
    patched.  With strict=True a DomainError listing the offending row
    indices is raised instead.
    """
    check_bound(expr, data.schema)
    values = _eval(expr, data, data.n_rows)
    values = np.asarray(values, dtype=float)
    if values.shape != (data.n_rows,):
        values = np.broadcast_to(values, (data.n_rows,)).astype(float)
    if strict:
        bad = invalid_rows(values)
        if bad.size:
            raise DomainError(bad.tolist())
    return values


def invalid_rows(values: np.ndarray) -> np.ndarray:
    """Indices of rows where evaluation left a non-finite value."""
    return np.flatnonzero(~np.isfinite(values))


# ---------------------------------------------------------------------------
# Random generation


def _random_terminal(rng, schema: Schema, const_range, p_constant: float) -> Expression:
    names = schema.names
    if not names or rng.random() < p_constant:
        lo, hi = const_range
        return Constant(rng.uniform(lo, hi))
    name = names[rng.integers(len(names))]
    spec = schema[name]
    if spec.kind == "categorical":
        lo, hi = const_range
        table = {cat: rng.uniform(lo, hi) for cat in spec.categories}
        return CategoryMap(name, table)
    return Feature(name)


def random_tree(
    rng,
    schema: Schema,
    ops: OperatorSet,
    max_depth: int,
    method: str = "grow",
    const_range: tuple[float, float] = (-5.0, 5.0),
    p_constant: float = 0.3,
) -> Expression:
    """Grow a random well-formed tree of depth <= max_depth.

    `full` puts terminals only at max_depth; `grow` may stop early.
    Deterministic for a fixed rng state.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if method not in ("grow", "full"):
        raise ValueError(f"method must be grow or full, got {method!r}")

    def build(remaining: int) -> Expression:
        if remaining <= 1:
            return _random_terminal(rng, schema, const_range, p_constant)
        if method == "grow" and rng.random() < 0.3:
            return _random_terminal(rng, schema, const_range, p_constant)
        choices = ops.all
        if not choices:
            raise EmptyOperatorSet("no operators configured for an internal node")
        op = choices[rng.integers(len(choices))]
        if op in ops.unary:
            return Unary(op, build(remaining - 1))
        return Binary(op, build(remaining - 1), build(remaining - 1))

    return build(max_depth)
