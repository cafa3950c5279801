"""Symbolic calculus over expression trees: differentiation, simplification,
sum-of-products expansion, substitution, subtree extraction and 1-D sweeps.

Derivatives of partial-domain operators (log, sqrt, div, inv) are emitted
symbolically without domain checks; non-finite values surface at evaluation
time, matching the unprotected-operator policy of the evaluator.
"""

from __future__ import annotations

import math
from functools import cmp_to_key
from typing import Mapping, Sequence

import numpy as np

from .datasets import Dataset
from .expressions import (
    Binary,
    CategoryMap,
    Constant,
    Expression,
    ExpressionError,
    Feature,
    InvalidPath,
    Unary,
    UnknownCategory,
    evaluate,
    node_count,
    subtree_at,
    walk,
)

__all__ = [
    "differentiate",
    "simplify",
    "expand",
    "expanded_terms",
    "substitute",
    "extract_module",
    "find_path",
    "sweep",
    "NonNumericVariable",
    "InvalidPath",
]


class NonNumericVariable(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"cannot differentiate with respect to categorical column {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# Differentiation

_ZERO = Constant(0.0)
_ONE = Constant(1.0)


def _mul(a: Expression, b: Expression) -> Expression:
    return Binary("mul", a, b)


def _add(a: Expression, b: Expression) -> Expression:
    return Binary("add", a, b)


def differentiate(expr: Expression, wrt: str, simplified: bool = True) -> Expression:
    """Exact partial derivative with respect to a numeric column.

    Category lookups are piecewise-constant in every numeric column, so they
    differentiate to zero; asking for the derivative with respect to the
    categorical column itself is an error.
    """
    for node in walk(expr):
        if isinstance(node, CategoryMap) and node.name == wrt:
            raise NonNumericVariable(wrt)
    d = _diff(expr, wrt)
    return simplify(d) if simplified else d


def _diff(e: Expression, x: str) -> Expression:
    if isinstance(e, Constant) or isinstance(e, CategoryMap):
        return _ZERO
    if isinstance(e, Feature):
        return _ONE if e.name == x else _ZERO
    if isinstance(e, Unary):
        u, du = e.child, _diff(e.child, x)
        if e.op == "neg":
            return Unary("neg", du)
        if e.op == "sqrt":
            return Binary("div", du, _mul(Constant(2.0), Unary("sqrt", u)))
        if e.op == "exp":
            return _mul(Unary("exp", u), du)
        if e.op == "log":
            return Binary("div", du, u)
        if e.op == "square":
            return _mul(Constant(2.0), _mul(u, du))
        # inv: d(1/u) = -du / u^2
        return Unary("neg", Binary("div", du, Unary("square", u)))
    l, r = e.left, e.right
    dl, dr = _diff(l, x), _diff(r, x)
    if e.op == "add":
        return _add(dl, dr)
    if e.op == "sub":
        return Binary("sub", dl, dr)
    if e.op == "mul":
        return _add(_mul(dl, r), _mul(l, dr))
    # div: (dl*r - l*dr) / r^2
    return Binary("div", Binary("sub", _mul(dl, r), _mul(l, dr)), Unary("square", r))


# ---------------------------------------------------------------------------
# Simplification

_CONST_UNARY = {
    "neg": lambda x: -x,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
    "square": lambda x: x * x,
    "inv": lambda x: 1.0 / x,
}

_CONST_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def _fold_unary(op: str, v: float) -> Expression | None:
    try:
        out = _CONST_UNARY[op](v)
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    return Constant(out) if math.isfinite(out) else None


def _fold_binary(op: str, a: float, b: float) -> Expression | None:
    try:
        out = _CONST_BINARY[op](a, b)
    except (OverflowError, ZeroDivisionError):
        return None
    return Constant(out) if math.isfinite(out) else None


def _additive_terms(e: Expression, sign: float, out: list):
    if isinstance(e, Binary) and e.op == "add":
        _additive_terms(e.left, sign, out)
        _additive_terms(e.right, sign, out)
    elif isinstance(e, Binary) and e.op == "sub":
        _additive_terms(e.left, sign, out)
        _additive_terms(e.right, -sign, out)
    elif isinstance(e, Unary) and e.op == "neg":
        _additive_terms(e.child, -sign, out)
    else:
        out.append((sign, e))


def _coeff_core(e: Expression) -> tuple[float, Expression | None]:
    """View a term as coeff * core (core None for pure constants)."""
    if isinstance(e, Constant):
        return e.value, None
    if isinstance(e, Binary) and e.op == "mul":
        if isinstance(e.left, Constant):
            return e.left.value, e.right
        if isinstance(e.right, Constant):
            return e.right.value, e.left
    return 1.0, e


def _rebuild_sum(terms: list[tuple[float, Expression]], const: float) -> Expression:
    parts: list[tuple[float, Expression]] = [(c, core) for c, core in terms if c != 0.0]
    if not parts:
        return Constant(const)
    acc: Expression | None = None
    if const != 0.0 and parts[0][0] < 0:
        # lead with the constant so "5 - x" stays a subtraction, not neg(x)+5
        acc = Constant(const)
        const = 0.0
    for coeff, core in parts:
        if acc is None:
            acc = _scaled(coeff, core)
        elif coeff < 0:
            acc = Binary("sub", acc, _scaled(-coeff, core))
        else:
            acc = Binary("add", acc, _scaled(coeff, core))
    if const < 0:
        return Binary("sub", acc, Constant(-const))
    if const > 0:
        return Binary("add", acc, Constant(const))
    return acc


def _scaled(coeff: float, core: Expression) -> Expression:
    if coeff == 1.0:
        return core
    if coeff == -1.0:
        return Unary("neg", core)
    return _mul(Constant(coeff), core)


def _simplify_sum(e: Binary) -> Expression:
    raw: list[tuple[float, Expression]] = []
    _additive_terms(e, 1.0, raw)
    const = 0.0
    order: list[Expression] = []
    coeffs: dict[Expression, float] = {}
    for sign, term in raw:
        c, core = _coeff_core(term)
        if core is None:
            const += sign * c
            continue
        if core not in coeffs:
            coeffs[core] = 0.0
            order.append(core)
        coeffs[core] += sign * c
    return _rebuild_sum([(coeffs[core], core) for core in order], const)


def _mul_factors(e: Expression, out: list) -> float:
    if isinstance(e, Binary) and e.op == "mul":
        return _mul_factors(e.left, out) * _mul_factors(e.right, out)
    if isinstance(e, Unary) and e.op == "neg":
        return -_mul_factors(e.child, out)
    if isinstance(e, Constant):
        return e.value
    out.append(e)
    return 1.0


def _rebuild_product(scale: float, factors: list[Expression]) -> Expression:
    if scale == 0.0:
        return Constant(0.0)
    if not factors:
        return Constant(scale)
    acc = factors[0]
    for f in factors[1:]:
        acc = _mul(acc, f)
    return _scaled(scale, acc)


def _is_sum(e: Expression) -> bool:
    return isinstance(e, Binary) and e.op in ("add", "sub")


def _distribute_scale(scale: float, chain: Expression) -> Expression:
    raw: list[tuple[float, Expression]] = []
    _additive_terms(chain, 1.0, raw)
    const = 0.0
    terms: list[tuple[float, Expression]] = []
    for sign, term in raw:
        c, core = _coeff_core(term)
        if core is None:
            const += sign * c
        else:
            terms.append((scale * sign * c, core))
    return _rebuild_sum(terms, scale * const)


def _simplify_product(e: Binary) -> Expression:
    factors: list[Expression] = []
    scale = _mul_factors(e, factors)
    plain = _rebuild_product(scale, factors)
    if len(factors) == 1 and _is_sum(factors[0]):
        distributed = _distribute_scale(scale, factors[0])
        if node_count(distributed) <= node_count(plain):
            return distributed
    return plain


def _simplify_once(e: Expression) -> Expression:
    if isinstance(e, (Constant, Feature, CategoryMap)):
        return e
    if isinstance(e, Unary):
        c = _simplify_once(e.child)
        if isinstance(c, Constant):
            folded = _fold_unary(e.op, c.value)
            if folded is not None:
                return folded
        if e.op == "neg":
            if isinstance(c, Unary) and c.op == "neg":
                return c.child
            if isinstance(c, Binary) and c.op == "sub":
                return Binary("sub", c.right, c.left)
            if isinstance(c, Binary) and c.op == "mul":
                return _simplify_product(Binary("mul", Constant(-1.0), c))
        if e.op == "inv" and isinstance(c, Unary) and c.op == "inv":
            return c.child
        return Unary(e.op, c)

    l = _simplify_once(e.left)
    r = _simplify_once(e.right)
    if isinstance(l, Constant) and isinstance(r, Constant):
        folded = _fold_binary(e.op, l.value, r.value)
        if folded is not None:
            return folded
    if e.op in ("add", "sub"):
        return _simplify_sum(Binary(e.op, l, r))
    if e.op == "mul":
        return _simplify_product(Binary("mul", l, r))
    # div
    if isinstance(r, Constant) and r.value != 0.0:
        return _simplify_product(_mul(Constant(1.0 / r.value), l))
    if isinstance(l, Constant) and l.value == 0.0:
        return Constant(0.0)
    return Binary("div", l, r)


def simplify(expr: Expression) -> Expression:
    """Value-preserving cleanup: constant folding, identity removal, affine
    collection and like-term merging.  Never increases the node count."""
    current = expr
    for _ in range(6):
        nxt = _simplify_once(current)
        if nxt == current:
            return nxt
        current = nxt
    return current


# ---------------------------------------------------------------------------
# Expansion to sum-of-products

_Poly = dict  # tuple[str, ...] -> float


def _poly_const(c: float) -> _Poly:
    return {(): c}


def _poly_add(a: _Poly, b: _Poly, sign: float = 1.0) -> _Poly:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + sign * v
    return out


def _poly_mul(a: _Poly, b: _Poly) -> _Poly:
    out: _Poly = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(sorted(ka + kb))
            out[k] = out.get(k, 0.0) + va * vb
    return out


def _expand_poly(e: Expression, atoms: dict[str, Expression]) -> _Poly:
    if isinstance(e, Constant):
        return _poly_const(e.value)
    if isinstance(e, (Feature, CategoryMap)):
        return _atom_poly(e, atoms)
    if isinstance(e, Unary):
        if e.op == "neg":
            return _poly_add({}, _expand_poly(e.child, atoms), -1.0)
        if e.op == "square":
            p = _expand_poly(e.child, atoms)
            return _poly_mul(p, p)
        return _atom_poly(Unary(e.op, expand(e.child)), atoms)
    if e.op == "add":
        return _poly_add(_expand_poly(e.left, atoms), _expand_poly(e.right, atoms))
    if e.op == "sub":
        return _poly_add(_expand_poly(e.left, atoms), _expand_poly(e.right, atoms), -1.0)
    if e.op == "mul":
        return _poly_mul(_expand_poly(e.left, atoms), _expand_poly(e.right, atoms))
    # div stays opaque, with both sides individually expanded
    return _atom_poly(Binary("div", expand(e.left), expand(e.right)), atoms)


def _atom_poly(atom: Expression, atoms: dict[str, Expression]) -> _Poly:
    from .parsing import print_expression

    key = print_expression(atom)
    atoms.setdefault(key, atom)
    return {(key,): 1.0}


def _term_order(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    # lexicographic on the sorted atom multiset; a longer multiset wins a
    # prefix tie (higher total degree first), putting the constant term last
    for x, y in zip(a, b):
        if x != y:
            return -1 if x < y else 1
    if len(a) == len(b):
        return 0
    return -1 if len(a) > len(b) else 1


def expanded_terms(expr: Expression) -> list[tuple[float, tuple[Expression, ...]]]:
    """Expansion as (coefficient, atom product) pairs in canonical term order;
    the constant term (empty product) comes last when present."""
    atoms: dict[str, Expression] = {}
    poly = _expand_poly(expr, atoms)
    keys = sorted(poly.keys(), key=cmp_to_key(_term_order))
    out = []
    for k in keys:
        coeff = poly[k]
        if coeff == 0.0 and k:
            continue
        out.append((coeff, tuple(atoms[name] for name in k)))
    if len(out) > 1 and out[-1][1] == () and out[-1][0] == 0.0:
        out.pop()
    return out


def expand(expr: Expression) -> Expression:
    """Distribute products over sums into a canonical sum of products.

    Divisions and transcendental calls pass through as opaque atoms (their
    children are expanded in place); like terms are combined.
    """
    terms = expanded_terms(expr)
    acc: Expression | None = None
    const: float | None = None
    parts: list[tuple[float, Expression]] = []
    for coeff, atom_tuple in terms:
        if not atom_tuple:
            const = coeff
            continue
        prod: Expression = atom_tuple[0]
        for a in atom_tuple[1:]:
            prod = _mul(prod, a)
        parts.append((coeff, prod))
    return _rebuild_sum(parts, const or 0.0)


# ---------------------------------------------------------------------------
# Substitution, module extraction, sweeps


def substitute(expr: Expression, binding: Mapping[str, float | str]) -> Expression:
    """Replace bound features and category lookups by constants, then simplify.

    Numeric columns bind to reals; categorical columns bind to a category
    label, resolved through each lookup's table.
    """
    for name, value in binding.items():
        if isinstance(value, str):
            continue
        if not math.isfinite(float(value)):
            raise ValueError(f"binding for {name!r} must be finite")

    def rec(e: Expression) -> Expression:
        if isinstance(e, Feature) and e.name in binding:
            value = binding[e.name]
            if isinstance(value, str):
                raise ValueError(f"numeric column {e.name!r} bound to category {value!r}")
            return Constant(float(value))
        if isinstance(e, CategoryMap) and e.name in binding:
            value = binding[e.name]
            if not isinstance(value, str):
                raise ValueError(f"categorical column {e.name!r} bound to number {value!r}")
            table = e.mapping
            if value not in table:
                raise UnknownCategory(e.name, value)
            return Constant(table[value])
        if isinstance(e, Unary):
            return Unary(e.op, rec(e.child))
        if isinstance(e, Binary):
            return Binary(e.op, rec(e.left), rec(e.right))
        return e

    return simplify(rec(expr))


def extract_module(expr: Expression, path: Sequence[int]) -> Expression:
    """Return the subtree at a child-index path as an independent expression."""
    return subtree_at(expr, path)


def find_path(expr: Expression, target: Expression) -> tuple[int, ...] | None:
    """Child-index path of the first subtree structurally equal to `target`."""

    def rec(node: Expression, path: tuple[int, ...]):
        if node == target:
            return path
        if isinstance(node, Unary):
            return rec(node.child, path + (0,))
        if isinstance(node, Binary):
            hit = rec(node.left, path + (0,))
            if hit is not None:
                return hit
            return rec(node.right, path + (1,))
        return None

    return rec(expr, ())


def sweep(
    expr: Expression,
    binding: Mapping[str, float | str],
    wrt: str,
    bounds: tuple[float, float],
    steps: int,
) -> np.ndarray:
    """Evaluate the expression over an even grid of one variable, all other
    variables held at the binding.  Returns an array of (x, value) rows."""
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("sweep range must satisfy lo < hi")
    if steps < 2:
        raise ValueError("sweep needs at least 2 steps")
    fixed = {k: v for k, v in binding.items() if k != wrt}
    reduced = substitute(expr, fixed)
    grid = np.linspace(lo, hi, steps)
    data = Dataset.from_dict({wrt: grid})
    values = evaluate(reduced, data)
    return np.column_stack([grid, values])
