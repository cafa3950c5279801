"""Lowering of expression trees to an interaction graph and the edge-complexity measure.

Complexity is the number of edges in the model's graph representation after
affine constants are absorbed into edge weights:

* an affine wrapper ``a*x + b`` around a numeric subexpression contributes no
  edges (the scale and shift ride on the edge feeding the parent interaction,
  or on the final output edge);
* every surviving unary interaction contributes 1 edge, every binary
  interaction 2 edges;
* n-ary additive/multiplicative chains are normalized to n-1 binary
  interactions first, with chain constants absorbed as bias;
* one final edge connects the root to the output register.

Category lookups are the one place affine absorption stops: the lookup table
is the node's parameterization and its outgoing edge carries no weights, so a
scale or shift applied directly to a category lookup materializes as a real
interaction against a constant node.  A bare terminal has complexity 1 (the
output edge only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .expressions import (
    Binary,
    CategoryMap,
    Constant,
    Expression,
    Feature,
    Unary,
)

__all__ = ["complexity", "to_dot", "lower_graph", "LoweredGraph"]


@dataclass
class _Handle:
    """A lowered subexpression: value = w * node + b, node None for constants."""

    node: int | None
    w: float
    b: float
    rigid: bool = False  # True for bare category lookups: no affine on the edge

    @property
    def is_const(self) -> bool:
        return self.node is None

    def identity_affine(self) -> bool:
        return self.w == 1.0 and self.b == 0.0


@dataclass
class LoweredGraph:
    """Interaction graph: node kinds/labels plus weighted edges."""

    kinds: list[str] = field(default_factory=list)  # feature|category|const|op|output
    labels: list[str] = field(default_factory=list)
    edges: list[tuple[int, int, float, float]] = field(default_factory=list)

    def add_node(self, kind: str, label: str) -> int:
        self.kinds.append(kind)
        self.labels.append(label)
        return len(self.kinds) - 1

    def add_edge(self, src: int, dst: int, w: float = 1.0, b: float = 0.0) -> None:
        self.edges.append((src, dst, w, b))


def _safe(fn, *args) -> float:
    try:
        v = fn(*args)
    except (ValueError, OverflowError, ZeroDivisionError):
        return math.nan
    return float(v)


_CONST_UNARY = {
    "neg": lambda x: -x,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
    "square": lambda x: x * x,
    "inv": lambda x: 1.0 / x,
}


class _Lowering:
    def __init__(self):
        self.graph = LoweredGraph()
        self._feature_nodes: dict[str, int] = {}
        self._category_nodes: dict[CategoryMap, int] = {}

    # -- node helpers

    def _feature(self, name: str) -> int:
        if name not in self._feature_nodes:
            self._feature_nodes[name] = self.graph.add_node("feature", name)
        return self._feature_nodes[name]

    def _category(self, node: CategoryMap) -> int:
        if node not in self._category_nodes:
            self._category_nodes[node] = self.graph.add_node("category", node.name)
        return self._category_nodes[node]

    def _const(self, value: float) -> int:
        return self.graph.add_node("const", _fmt(value))

    def _op(self, op: str, inputs: list[tuple[int, float, float]]) -> int:
        nid = self.graph.add_node("op", op)
        for src, w, b in inputs:
            self.graph.add_edge(src, nid, w, b)
        return nid

    # -- attaching a handle as an interaction input

    def attach(self, h: _Handle) -> tuple[int, float, float]:
        if h.is_const:
            return (self._const(h.b), 1.0, 0.0)
        if h.rigid and not h.identity_affine():
            h = self.materialize(h)
        return (h.node, h.w, h.b)

    def materialize(self, h: _Handle) -> _Handle:
        """Turn a pending affine on a rigid node into explicit interactions."""
        node, w, b = h.node, h.w, h.b
        if w == 1.0:
            # pure shift on a rigid node: a real add/sub against a constant
            if b != 0.0:
                op = "sub" if b < 0 else "add"
                node = self._op(op, [(node, 1.0, 0.0), (self._const(abs(b)), 1.0, 0.0)])
            return _Handle(node, 1.0, 0.0)
        if w == -1.0:
            node = self._op("neg", [(node, 1.0, 0.0)])
        else:
            node = self._op("mul", [(node, 1.0, 0.0), (self._const(w), 1.0, 0.0)])
        # the new interaction node is numeric; the shift rides its out-edge
        return _Handle(node, 1.0, b)

    # -- lowering proper

    def lower(self, expr: Expression) -> _Handle:
        if isinstance(expr, Constant):
            return _Handle(None, 0.0, expr.value)
        if isinstance(expr, Feature):
            return _Handle(self._feature(expr.name), 1.0, 0.0)
        if isinstance(expr, CategoryMap):
            return _Handle(self._category(expr), 1.0, 0.0, rigid=True)
        if isinstance(expr, Unary):
            return self._lower_unary(expr)
        if expr.op in ("add", "sub"):
            return self._lower_chain_add(expr)
        if expr.op == "mul":
            return self._lower_chain_mul(expr)
        return self._lower_div(expr)

    def _lower_unary(self, expr: Unary) -> _Handle:
        h = self.lower(expr.child)
        if h.is_const:
            return _Handle(None, 0.0, _safe(_CONST_UNARY[expr.op], h.b))
        if expr.op == "neg":
            return _Handle(h.node, -h.w, -h.b, h.rigid)
        node = self._op(expr.op, [self.attach(h)])
        return _Handle(node, 1.0, 0.0)

    def _additive_terms(self, expr: Expression, sign: float, out: list):
        if isinstance(expr, Binary) and expr.op == "add":
            self._additive_terms(expr.left, sign, out)
            self._additive_terms(expr.right, sign, out)
        elif isinstance(expr, Binary) and expr.op == "sub":
            self._additive_terms(expr.left, sign, out)
            self._additive_terms(expr.right, -sign, out)
        elif isinstance(expr, Unary) and expr.op == "neg":
            self._additive_terms(expr.child, -sign, out)
        else:
            out.append((sign, expr))

    def _lower_chain_add(self, expr: Binary) -> _Handle:
        terms: list[tuple[float, Expression]] = []
        self._additive_terms(expr, 1.0, terms)
        bias = 0.0
        handles: list[tuple[float, _Handle]] = []
        for sign, sub in terms:
            h = self.lower(sub)
            if h.is_const:
                bias += sign * h.b
            else:
                bias += sign * h.b
                handles.append((sign, _Handle(h.node, h.w, 0.0, h.rigid)))
        if not handles:
            return _Handle(None, 0.0, bias)
        if len(handles) == 1:
            sign, h = handles[0]
            return _Handle(h.node, sign * h.w, bias, h.rigid)

        def signed_input(sign: float, h: _Handle) -> tuple[str, tuple[int, float, float]]:
            # signs fold into edge weights except on rigid edges, where the
            # subtraction is structural (a sub interaction)
            if h.rigid:
                if sign < 0:
                    return "sub", self.attach(h)
                return "add", self.attach(h)
            return "add", self.attach(_Handle(h.node, sign * h.w, 0.0))

        sign0, h0 = handles[0]
        if h0.rigid and sign0 < 0:
            h0 = _Handle(self._op("neg", [self.attach(h0)]), 1.0, 0.0)
            sign0 = 1.0
        acc = h0 if sign0 > 0 else _Handle(h0.node, sign0 * h0.w, 0.0)
        for sign, h in handles[1:]:
            op, edge = signed_input(sign, h)
            node = self._op(op, [self.attach(acc), edge])
            acc = _Handle(node, 1.0, 0.0)
        return _Handle(acc.node, 1.0, bias)

    def _factor_list(self, expr: Expression, out: list) -> float:
        if isinstance(expr, Binary) and expr.op == "mul":
            return self._factor_list(expr.left, out) * self._factor_list(expr.right, out)
        if isinstance(expr, Unary) and expr.op == "neg":
            return -self._factor_list(expr.child, out)
        out.append(expr)
        return 1.0

    def _lower_chain_mul(self, expr: Binary) -> _Handle:
        factors: list[Expression] = []
        scale = self._factor_list(expr, factors)
        handles: list[_Handle] = []
        for f in factors:
            h = self.lower(f)
            if h.is_const:
                scale *= h.b
            else:
                handles.append(h)
        if not handles:
            return _Handle(None, 0.0, scale)
        if len(handles) == 1:
            h = handles[0]
            return _Handle(h.node, scale * h.w, scale * h.b, h.rigid)
        acc = handles[0]
        for h in handles[1:]:
            node = self._op("mul", [self.attach(acc), self.attach(h)])
            acc = _Handle(node, 1.0, 0.0)
        return _Handle(acc.node, scale, 0.0)

    def _lower_div(self, expr: Binary) -> _Handle:
        num = self.lower(expr.left)
        den = self.lower(expr.right)
        if den.is_const:
            if num.is_const:
                return _Handle(None, 0.0, _safe(lambda a, b: a / b, num.b, den.b))
            d = den.b
            if d == 0.0:
                w, b = math.inf, math.inf
            else:
                w, b = num.w / d, num.b / d
            return _Handle(num.node, w, b, num.rigid)
        if num.is_const:
            node = self._op("inv", [self.attach(den)])
            return _Handle(node, num.b, 0.0)
        node = self._op("div", [self.attach(num), self.attach(den)])
        return _Handle(node, 1.0, 0.0)

    def finish(self, expr: Expression) -> LoweredGraph:
        h = self.lower(expr)
        if h.is_const:
            src, w, b = self._const(h.b), 1.0, 0.0
        else:
            src, w, b = self.attach(h)
        out = self.graph.add_node("output", "output")
        self.graph.add_edge(src, out, w, b)
        return self.graph


def lower_graph(expr: Expression) -> LoweredGraph:
    """Lower a tree to its interaction graph (used by complexity and to_dot)."""
    return _Lowering().finish(expr)


def complexity(expr: Expression) -> int:
    """Number of edges in the lowered graph representation."""
    return len(lower_graph(expr).edges)


def _fmt(value: float) -> str:
    if value != value:  # NaN
        return "nan"
    return f"{value:.6g}"


_SHAPES = {
    "feature": "box",
    "category": "box",
    "const": "plaintext",
    "op": "ellipse",
    "output": "doublecircle",
}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(expr: Expression, name: str = "model") -> str:
    """Render the lowered interaction graph as a DOT digraph.

    The number of edges in the output equals complexity(expr); absorbed
    affine constants appear as edge labels.
    """
    g = lower_graph(expr)
    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;"]
    for i, (kind, label) in enumerate(zip(g.kinds, g.labels)):
        lines.append(f"  n{i} [label={_quote(label)}, shape={_SHAPES[kind]}];")
    for src, dst, w, b in g.edges:
        parts = []
        if w != 1.0:
            parts.append(f"*{_fmt(w)}")
        if b != 0.0:
            parts.append(f"{'+' if b > 0 else '-'}{_fmt(abs(b))}")
        attr = f" [label={_quote(' '.join(parts))}]" if parts else ""
        lines.append(f"  n{src} -> n{dst}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"
