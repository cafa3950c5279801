"""Infix formula text <-> expression trees, and the JSON model container.

Grammar notes:

* numbers in decimal or scientific notation, `.` always the decimal point;
* `+ - * / ^` with standard precedence, `^` right-associative and binding
  tighter than unary minus;
* implicit multiplication where a number or closing parenthesis is followed
  by an identifier or `(`  (``0.264311(BMXWT)``, ``2x``, ``(a)(b)``);
* function calls ``sqrt(x)``, ``exp(x)``, ``log(x)`` (plus ``square``,
  ``inv``, ``neg`` aliases);
* ``cases{Category: value, ...}(COLUMN)`` builds a categorical lookup;
* `^` exponents must be constants expressible with the tree operators
  (2 -> square, 0.5 -> sqrt, -1 -> inverse, small integers -> products).
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Mapping

from .expressions import (
    Binary,
    CategoryMap,
    Constant,
    Expression,
    Feature,
    Unary,
    features_of,
    walk,
)
from .graphs import complexity

__all__ = [
    "parse",
    "print_expression",
    "ParseError",
    "ExpressionSyntaxError",
    "UnknownFunction",
    "UnbalancedParentheses",
    "ModelDocument",
    "MalformedDocument",
    "ComplexityMismatch",
    "save_model",
    "load_model",
]


class ParseError(Exception):
    """Base for formula parsing failures; carries the byte offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class ExpressionSyntaxError(ParseError):
    pass


class UnknownFunction(ParseError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown function {name!r}", position)
        self.name = name


class UnbalancedParentheses(ParseError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(){},:])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)

_FUNCTIONS = {"sqrt", "exp", "log", "square", "inv", "neg"}


@dataclass
class _Token:
    kind: str  # num | ident | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.cur
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        if text == ")":
            raise UnbalancedParentheses("expected closing parenthesis", tok.pos)
        raise ExpressionSyntaxError(f"expected {text!r}", tok.pos)

    def at_op(self, *texts: str) -> bool:
        return self.cur.kind == "op" and self.cur.text in texts

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while self.at_op("+", "-"):
            op = self.advance().text
            rhs = self.parse_term()
            node = Binary("add" if op == "+" else "sub", node, rhs)
        return node

    # term := unary (('*'|'/'| implicit) unary)*
    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while True:
            if self.at_op("*", "/"):
                op = self.advance().text
                rhs = self.parse_unary()
                node = Binary("mul" if op == "*" else "div", node, rhs)
            elif self._implicit_mul_ahead():
                rhs = self.parse_unary()
                node = Binary("mul", node, rhs)
            else:
                return node

    def _implicit_mul_ahead(self) -> bool:
        tok = self.cur
        if tok.kind == "ident":
            return True
        return tok.kind == "op" and tok.text == "("

    # unary := '-' unary | '+' unary | power
    def parse_unary(self) -> Expression:
        if self.at_op("-"):
            self.advance()
            operand = self.parse_unary()
            if isinstance(operand, Constant):
                return Constant(-operand.value)
            return Unary("neg", operand)
        if self.at_op("+"):
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    # power := primary ('^' unary)?   (right-associative via recursion)
    def parse_power(self) -> Expression:
        base = self.parse_primary()
        if self.at_op("^"):
            pos = self.advance().pos
            exponent = self.parse_unary_for_exponent()
            return self._apply_power(base, exponent, pos)
        return base

    def parse_unary_for_exponent(self) -> Expression:
        # the exponent itself may carry a sign or a nested power
        if self.at_op("-"):
            self.advance()
            inner = self.parse_unary_for_exponent()
            if isinstance(inner, Constant):
                return Constant(-inner.value)
            return Unary("neg", inner)
        return self.parse_power()

    def _apply_power(self, base: Expression, exponent: Expression, pos: int) -> Expression:
        if not isinstance(exponent, Constant):
            raise ExpressionSyntaxError("exponent must be a constant", pos)
        e = exponent.value
        if e == 2.0:
            return Unary("square", base)
        if e == 1.0:
            return base
        if e == 0.0:
            return Constant(1.0)
        if e == 0.5:
            return Unary("sqrt", base)
        if e == -1.0:
            return Unary("inv", base)
        if e == int(e) and 3 <= int(e) <= 6:
            node = base
            for _ in range(int(e) - 1):
                node = Binary("mul", node, base)
            return node
        if e == int(e) and -6 <= int(e) <= -2:
            return Unary("inv", self._apply_power(base, Constant(-e), pos))
        raise ExpressionSyntaxError(f"unsupported exponent {e!r}", pos)

    def parse_primary(self) -> Expression:
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return Constant(float(tok.text))
        if tok.kind == "ident":
            if tok.text == "cases":
                return self.parse_cases()
            nxt = self.tokens[self.i + 1]
            if nxt.kind == "op" and nxt.text == "(":
                if tok.text not in _FUNCTIONS:
                    raise UnknownFunction(tok.text, tok.pos)
                self.advance()
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                if tok.text == "square":
                    return Unary("square", arg)
                if tok.text == "inv":
                    return Unary("inv", arg)
                if tok.text == "neg":
                    return Constant(-arg.value) if isinstance(arg, Constant) else Unary("neg", arg)
                return Unary(tok.text, arg)
            self.advance()
            return Feature(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        if tok.kind == "op" and tok.text == ")":
            raise UnbalancedParentheses("unmatched closing parenthesis", tok.pos)
        if tok.kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", tok.pos)
        raise ExpressionSyntaxError(f"unexpected token {tok.text!r}", tok.pos)

    # cases{Category: value, ...}(COLUMN)
    def parse_cases(self) -> Expression:
        self.advance()  # cases
        self.expect("{")
        table: dict[str, float] = {}
        while True:
            key = self.cur
            if key.kind != "ident":
                raise ExpressionSyntaxError("expected category name", key.pos)
            self.advance()
            self.expect(":")
            sign = 1.0
            if self.at_op("-"):
                self.advance()
                sign = -1.0
            val = self.cur
            if val.kind != "num":
                raise ExpressionSyntaxError("expected numeric category value", val.pos)
            self.advance()
            if key.text in table:
                raise ExpressionSyntaxError(f"duplicate category {key.text!r}", key.pos)
            table[key.text] = sign * float(val.text)
            if self.at_op(","):
                self.advance()
                continue
            break
        self.expect("}")
        self.expect("(")
        col = self.cur
        if col.kind != "ident":
            raise ExpressionSyntaxError("expected column name", col.pos)
        self.advance()
        self.expect(")")
        return CategoryMap(col.text, table)


def parse(text: str) -> Expression:
    """Parse an infix formula into an expression tree."""
    parser = _Parser(text)
    node = parser.parse_expr()
    tok = parser.cur
    if tok.kind != "end":
        if tok.kind == "op" and tok.text == ")":
            raise UnbalancedParentheses("unmatched closing parenthesis", tok.pos)
        raise ExpressionSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
    return node


# ---------------------------------------------------------------------------
# Printing

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


def _prec(expr: Expression) -> int:
    if isinstance(expr, (Feature, CategoryMap)):
        return _ATOM
    if isinstance(expr, Constant):
        return _ATOM if expr.value >= 0 else _NEG
    if isinstance(expr, Unary):
        if expr.op == "neg":
            return _NEG
        if expr.op == "square":
            return _POW
        if expr.op == "inv":
            return _MUL
        return _ATOM  # function-call syntax
    return _ADD if expr.op in ("add", "sub") else _MUL


def _wrap(expr: Expression, minimum: int) -> str:
    s = print_expression(expr)
    return f"({s})" if _prec(expr) < minimum else s


def print_expression(expr: Expression) -> str:
    """Render a tree as infix text that re-parses to an evaluation-identical tree."""
    if isinstance(expr, Constant):
        return repr(expr.value)
    if isinstance(expr, Feature):
        return expr.name
    if isinstance(expr, CategoryMap):
        entries = ", ".join(f"{cat}: {repr(val)}" for cat, val in expr.table)
        return f"cases{{{entries}}}({expr.name})"
    if isinstance(expr, Unary):
        if expr.op == "neg":
            return "-" + _wrap(expr.child, _ATOM)
        if expr.op == "square":
            return _wrap(expr.child, _ATOM) + "^2"
        if expr.op == "inv":
            return "1/" + _wrap(expr.child, _POW)
        return f"{expr.op}({print_expression(expr.child)})"
    if expr.op in ("add", "sub"):
        left = _wrap(expr.left, _ADD)
        right = _wrap(expr.right, _ADD + 1 if expr.op == "sub" else _ADD)
        if expr.op == "add" and right.startswith("-"):
            return f"{left} - {right[1:]}"
        return f"{left} {'+' if expr.op == 'add' else '-'} {right}"
    if expr.op == "mul":
        return f"{_wrap(expr.left, _MUL)}*{_wrap(expr.right, _MUL + 1)}"
    return f"{_wrap(expr.left, _MUL)}/{_wrap(expr.right, _MUL + 1)}"


# ---------------------------------------------------------------------------
# Model documents


class MalformedDocument(Exception):
    pass


class ComplexityMismatch(MalformedDocument):
    def __init__(self, stored: int, recomputed: int):
        super().__init__(f"stored complexity {stored} != recomputed {recomputed}")
        self.stored = stored
        self.recomputed = recomputed


@dataclass
class ModelDocument:
    """A fitted model: formula text plus bookkeeping for reproducible reports."""

    expression: str
    features: list[str] = field(default_factory=list)
    categorical: dict[str, dict[str, float]] = field(default_factory=dict)
    complexity: int = 0
    train_r2: float | None = None
    test_r2: float | None = None
    seed: int = 0
    notes: str = ""

    @classmethod
    def from_expression(
        cls,
        expr: Expression,
        train_r2: float | None = None,
        test_r2: float | None = None,
        seed: int = 0,
        notes: str = "",
    ) -> "ModelDocument":
        categorical = {
            n.name: n.mapping for n in walk(expr) if isinstance(n, CategoryMap)
        }
        return cls(
            expression=print_expression(expr),
            features=sorted(features_of(expr)),
            categorical=categorical,
            complexity=complexity(expr),
            train_r2=train_r2,
            test_r2=test_r2,
            seed=seed,
            notes=notes,
        )

    def expr(self) -> Expression:
        return parse(self.expression)

    def to_json_dict(self) -> dict:
        return {
            "expression": self.expression,
            "features": list(self.features),
            "categorical": {k: dict(v) for k, v in self.categorical.items()},
            "metrics": {
                "complexity": self.complexity,
                "train_r2": self.train_r2,
                "test_r2": self.test_r2,
            },
            "seed": self.seed,
            "notes": self.notes,
        }


def save_model(doc: ModelDocument, path) -> None:
    payload = json.dumps(doc.to_json_dict(), indent=2)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(payload + "\n")
    os.replace(tmp, path)


def _require(mapping: Mapping, key: str, types) -> object:
    if key not in mapping:
        raise MalformedDocument(f"missing field {key!r}")
    value = mapping[key]
    if not isinstance(value, types):
        raise MalformedDocument(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def load_model(path) -> ModelDocument:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedDocument(f"cannot read model document: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedDocument("document root must be an object")
    expression = _require(raw, "expression", str)
    features = _require(raw, "features", list)
    categorical = _require(raw, "categorical", dict)
    metrics = _require(raw, "metrics", dict)
    stored_complexity = _require(metrics, "complexity", int)
    train_r2 = metrics.get("train_r2")
    test_r2 = metrics.get("test_r2")
    for name, val in (("train_r2", train_r2), ("test_r2", test_r2)):
        if val is not None and not isinstance(val, (int, float)):
            raise MalformedDocument(f"metric {name!r} must be numeric or null")
    seed = _require(raw, "seed", int)
    notes = _require(raw, "notes", str)

    try:
        expr = parse(expression)
    except ParseError as exc:
        raise MalformedDocument(f"stored expression does not parse: {exc}") from exc
    recomputed = complexity(expr)
    if recomputed != stored_complexity:
        raise ComplexityMismatch(stored_complexity, recomputed)
    referenced = {n.name: n.mapping for n in walk(expr) if isinstance(n, CategoryMap)}
    for col, table in referenced.items():
        stored = categorical.get(col, {})
        if set(table) - set(stored):
            raise MalformedDocument(f"categorical table for {col!r} incomplete")
    return ModelDocument(
        expression=expression,
        features=[str(f) for f in features],
        categorical={str(c): {str(k): float(v) for k, v in t.items()} for c, t in categorical.items()},
        complexity=stored_complexity,
        train_r2=None if train_r2 is None else float(train_r2),
        test_r2=None if test_r2 is None else float(test_r2),
        seed=seed,
        notes=notes,
    )
