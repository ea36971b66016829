"""Closed-form expressions extracted from (pruned) program graphs."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .grammar import OperatorKind
from .ops import apply_unary
from .program_graph import NodeRecord, ProgramGraph, WeightStore


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: OperatorKind
    child: "SymExpr"


@dataclass(frozen=True)
class Sum:
    terms: tuple["SymExpr", ...]


@dataclass(frozen=True)
class Product:
    factors: tuple["SymExpr", ...]


@dataclass(frozen=True)
class Scale:
    coef: float
    child: "SymExpr"


SymExpr = Union[Const, Var, Unary, Sum, Product, Scale]

ZERO = Const(0.0)


def evaluate(expr: SymExpr, env: Mapping[str, object]):
    """Evaluate with the same protected log/exp as the graph forward pass.

    ``env`` maps variable names to scalars or equally shaped arrays.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return np.asarray(env[expr.name], dtype=np.float64)
    if isinstance(expr, Unary):
        return apply_unary(expr.op, np.asarray(evaluate(expr.child, env), dtype=np.float64))
    if isinstance(expr, Scale):
        return expr.coef * evaluate(expr.child, env)
    if isinstance(expr, Sum):
        total = evaluate(expr.terms[0], env)
        for t in expr.terms[1:]:
            total = total + evaluate(t, env)
        return total
    if isinstance(expr, Product):
        total = evaluate(expr.factors[0], env)
        for f in expr.factors[1:]:
            total = total * evaluate(f, env)
        return total
    raise TypeError(f"not an expression: {expr!r}")


def size(expr: SymExpr) -> int:
    if isinstance(expr, (Const, Var)):
        return 1
    if isinstance(expr, (Unary, Scale)):
        return 1 + size(expr.child)
    parts = expr.terms if isinstance(expr, Sum) else expr.factors
    return 1 + sum(size(p) for p in parts)


def variables(expr: SymExpr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, (Unary, Scale)):
        return variables(expr.child)
    parts = expr.terms if isinstance(expr, Sum) else expr.factors
    return set().union(*(variables(p) for p in parts))


# -- extraction -------------------------------------------------------------


def extract(graph: ProgramGraph, weights: WeightStore) -> SymExpr:
    """Weighted-sum expression over the live, nonzero summands."""
    expr = _node_expr(graph.root, weights)
    return ZERO if expr is None else expr


def _node_expr(node: NodeRecord, weights: WeightStore) -> SymExpr | None:
    """Expression of a node, or None when it is identically zero."""
    terms: list[SymExpr] = []
    for s in node.summands:
        w = float(weights.values[s.weight_index])
        if weights.pruned[s.weight_index] or w == 0.0:
            continue
        if s.kind == "terminal":
            terms.append(Scale(w, Var(s.terminal)))
        elif s.kind == "constant":
            terms.append(Const(w))
        elif s.kind == "unary":
            inner = _node_expr(s.children[0], weights)
            if inner is None:
                value = float(apply_unary(s.op, np.float64(0.0)))
                if value != 0.0:
                    terms.append(Scale(w, Const(value)))
            else:
                terms.append(Scale(w, Unary(s.op, inner)))
        else:
            a = _node_expr(s.children[0], weights)
            b = _node_expr(s.children[1], weights)
            if s.op is OperatorKind.MULTIPLY:
                if a is not None and b is not None:
                    terms.append(Scale(w, Product((a, b))))
            elif a is not None and b is not None:
                terms.append(Scale(w, Sum((a, b))))
            elif a is not None or b is not None:
                terms.append(Scale(w, a if a is not None else b))
    if not terms:
        return None
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


# -- simplification ---------------------------------------------------------


def simplify(expr: SymExpr) -> SymExpr:
    """Constant folding, flattening, scale and like-term merging, identity removal.

    Runs single passes until the structure stops changing, so the result is a
    fixed point (``simplify(simplify(e)) == simplify(e)``).
    """
    while True:
        nxt = _simplify_pass(expr)
        if nxt == expr:
            return nxt
        expr = nxt


def _scale(coef: float, child: SymExpr) -> SymExpr:
    if coef == 0.0:
        return ZERO
    if isinstance(child, Const):
        return Const(coef * child.value)
    if isinstance(child, Scale):
        return _scale(coef * child.coef, child.child)
    if coef == 1.0:
        return child
    return Scale(coef, child)


def _simplify_pass(e: SymExpr) -> SymExpr:
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Unary):
        c = _simplify_pass(e.child)
        if isinstance(c, Const):
            return Const(float(apply_unary(e.op, np.float64(c.value))))
        return Unary(e.op, c)
    if isinstance(e, Scale):
        return _scale(e.coef, _simplify_pass(e.child))
    if isinstance(e, Sum):
        # like terms (same expression up to a scale factor) are collected in
        # order of first appearance
        coefs: dict[SymExpr, float] = {}
        const = 0.0
        for t in (_simplify_pass(t) for t in e.terms):
            for u in (t.terms if isinstance(t, Sum) else (t,)):
                if isinstance(u, Const):
                    const += u.value
                elif isinstance(u, Scale):
                    coefs[u.child] = coefs.get(u.child, 0.0) + u.coef
                else:
                    coefs[u] = coefs.get(u, 0.0) + 1.0
        terms = [_scale(c, u) for u, c in coefs.items() if c != 0.0]
        if const != 0.0:
            terms.append(Const(const))
        if not terms:
            return ZERO
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))
    if isinstance(e, Product):
        factors: list[SymExpr] = []
        coef = 1.0
        for f in (_simplify_pass(f) for f in e.factors):
            for u in (f.factors if isinstance(f, Product) else (f,)):
                if isinstance(u, Const):
                    coef *= u.value
                elif isinstance(u, Scale):
                    coef *= u.coef
                    factors.append(u.child)
                else:
                    factors.append(u)
        if coef == 0.0:
            return ZERO
        if not factors:
            return Const(coef)
        core = factors[0] if len(factors) == 1 else Product(tuple(factors))
        return _scale(coef, core)
    raise TypeError(f"not an expression: {e!r}")


# -- rendering --------------------------------------------------------------


def render(expr: SymExpr, precision: int = 3) -> str:
    """Infix text with coefficients rounded to ``precision`` significant digits."""
    if precision < 1:
        raise ValueError("precision must be >= 1")
    return _infix(expr, precision)


def _num(v: float, p: int) -> str:
    s = format(v, f".{p}g")
    return "0" if s == "-0" else s


def _infix(e: SymExpr, p: int) -> str:
    if isinstance(e, Const):
        return _num(e.value, p)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        inner = _infix(e.child, p)
        if e.op in (OperatorKind.POW2, OperatorKind.POW3):
            power = "^2" if e.op is OperatorKind.POW2 else "^3"
            atomic = isinstance(e.child, Var) or (
                isinstance(e.child, Const) and not inner.startswith("-")
            )
            return (inner if atomic else f"({inner})") + power
        return f"{e.op.value}({inner})"
    if isinstance(e, Scale):
        return f"{_num(e.coef, p)}*{_factor(e.child, p)}"
    if isinstance(e, Sum):
        out = _infix(e.terms[0], p)
        for t in e.terms[1:]:
            if isinstance(t, Scale) and t.coef < 0:
                out += " - " + _infix(Scale(-t.coef, t.child), p)
            elif isinstance(t, Const) and t.value < 0:
                out += " - " + _num(-t.value, p)
            else:
                out += " + " + _infix(t, p)
        return out
    if isinstance(e, Product):
        return "*".join(_factor(f, p) for f in e.factors)
    raise TypeError(f"not an expression: {e!r}")


def _factor(e: SymExpr, p: int) -> str:
    text = _infix(e, p)
    if isinstance(e, Sum) or text.startswith("-"):
        return f"({text})"
    return text


_PREFIX_HEADS = {
    "sum": Sum,
    "mul": Product,
    "scale": Scale,
    **{op.value: op for op in OperatorKind if op.arity == 1},
}
_NUMBER = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$|^[-+]?(inf|nan)$")
_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def to_prefix(expr: SymExpr) -> str:
    """Machine-readable s-expression form with full-precision constants."""
    if isinstance(expr, Const):
        return repr(float(expr.value))
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        return f"({expr.op.value} {to_prefix(expr.child)})"
    if isinstance(expr, Scale):
        return f"(scale {float(expr.coef)!r} {to_prefix(expr.child)})"
    if isinstance(expr, Sum):
        return "(sum " + " ".join(to_prefix(t) for t in expr.terms) + ")"
    if isinstance(expr, Product):
        return "(mul " + " ".join(to_prefix(f) for f in expr.factors) + ")"
    raise TypeError(f"not an expression: {expr!r}")


def parse_prefix(text: str) -> SymExpr:
    tokens = _TOKEN.findall(text)
    pos = 0

    def atom(tok: str) -> SymExpr:
        if _NUMBER.match(tok):
            return Const(float(tok))
        if not tok.isidentifier():
            raise ValueError(f"bad token {tok!r}")
        return Var(tok)

    def parse() -> SymExpr:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of prefix expression")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok != "(":
            return atom(tok)
        head = tokens[pos]
        pos += 1
        if head not in _PREFIX_HEADS:
            raise ValueError(f"unknown head {head!r}")
        args = []
        while pos < len(tokens) and tokens[pos] != ")":
            args.append(parse())
        if pos >= len(tokens):
            raise ValueError("missing ')'")
        pos += 1
        kind = _PREFIX_HEADS[head]
        if kind is Scale:
            if len(args) != 2 or not isinstance(args[0], Const):
                raise ValueError("scale takes a number and an expression")
            return Scale(args[0].value, args[1])
        if kind in (Sum, Product):
            if not args:
                raise ValueError(f"{head} needs at least one argument")
            return kind(tuple(args))
        if len(args) != 1:
            raise ValueError(f"{head} takes one argument")
        return Unary(kind, args[0])

    expr = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens in prefix expression")
    return expr
