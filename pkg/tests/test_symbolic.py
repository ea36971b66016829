from __future__ import annotations

import numpy as np
import pytest

from dpasr.grammar import OperatorKind, parse_grammar
from dpasr.program_graph import WeightStore, batch_forward, build_graph
from dpasr.symbolic import (
    ZERO,
    Const,
    Product,
    Scale,
    Sum,
    Unary,
    Var,
    evaluate,
    extract,
    parse_prefix,
    render,
    simplify,
    size,
    to_prefix,
    variables,
)

from conftest import find_summand, random_spec

SIN, EXP, LOG = OperatorKind.SIN, OperatorKind.EXP, OperatorKind.LOG


def final_walkthrough_tree():
    """The end state of the pruning walkthrough: 0.16 exp(-1.37 sin(0.39x) - 0.05 log(2.14y))."""
    spec = parse_grammar({"unary": ["sin", "exp", "log"], "binary": [], "terminals": ["x", "y"]})
    g = build_graph(spec, 2)
    values = np.zeros(g.weight_count)
    keep = []

    def put(node, label, value):
        s = find_summand(node, label)
        values[s.weight_index] = value
        keep.append(s.weight_index)
        return s

    e = put(g.root, "exp", 0.16).children[0]
    put(put(e, "sin", -1.37).children[0], "x", 0.39)
    put(put(e, "log", -0.05).children[0], "y", 2.14)
    pruned = np.ones(g.weight_count, dtype=bool)
    pruned[keep] = False
    return g, WeightStore(values, pruned)


class TestExtract:
    def test_all_pruned_is_zero(self, diffusion_spec):
        g = build_graph(diffusion_spec, 2)
        w = WeightStore(np.ones(g.weight_count), np.ones(g.weight_count, dtype=bool))
        assert extract(g, w) == ZERO
        assert render(extract(g, w)) == "0"

    def test_walkthrough_expression(self):
        g, w = final_walkthrough_tree()
        expr = simplify(extract(g, w))
        assert render(expr, 3) == "0.16*exp(-1.37*sin(0.39*x) - 0.05*log(2.14*y))"
        x = np.linspace(0.1, 1, 30)
        y = np.linspace(0.2, 2, 30)
        want = 0.16 * np.exp(-1.37 * np.sin(0.39 * x) - 0.05 * np.log(2.14 * y))
        np.testing.assert_allclose(evaluate(expr, {"x": x, "y": y}), want, rtol=1e-11)

    def test_zero_weights_dropped(self, diffusion_spec):
        g = build_graph(diffusion_spec, 1)
        w = np.zeros(g.weight_count)
        w[find_summand(g.root, "t").weight_index] = 2.0
        assert extract(g, WeightStore(w)) == Scale(2.0, Var("t"))

    def test_unary_over_zero_child_folds(self):
        spec = parse_grammar({"unary": ["exp"], "binary": [], "terminals": ["x"]})
        g = build_graph(spec, 1)
        w = np.zeros(g.weight_count)
        w[find_summand(g.root, "exp").weight_index] = 3.0
        expr = extract(g, WeightStore(w))
        assert evaluate(expr, {"x": 0.7}) == 3.0
        assert simplify(expr) == Const(3.0)

    def test_matches_forward_on_random_graphs(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            spec = random_spec(rng)
            g = build_graph(spec, int(rng.integers(0, 3)))
            w = WeightStore(rng.uniform(-0.6, 0.6, g.weight_count))
            w.prune(rng.choice(g.weight_count, g.weight_count // 3, replace=False))
            x = rng.uniform(-1, 1, (100, 2))
            fwd = batch_forward(g, w, x)
            got = np.broadcast_to(evaluate(extract(g, w), {"x": x[:, 0], "y": x[:, 1]}), fwd.shape)
            assert np.all(np.abs(got - fwd) <= 1e-9 * (1 + np.abs(fwd)))

    def test_full_precision_kept(self, diffusion_spec):
        g = build_graph(diffusion_spec, 0)
        w = WeightStore([0.1234567890123456789, 0.0, 0.0])
        assert extract(g, w) == Scale(0.1234567890123456789, Var("x"))


class TestSimplify:
    def test_identity_elimination(self):
        assert simplify(Sum((Const(0.0), Scale(1.0, Var("x"))))) == Var("x")

    def test_folding(self):
        assert simplify(Product((Const(2.0), Const(3.0)))) == Const(6.0)
        assert simplify(Unary(SIN, Const(0.0))) == Const(0.0)

    def test_scale_merging(self):
        e = Scale(2.0, Scale(3.0, Unary(SIN, Var("x"))))
        s = simplify(e)
        assert s == Scale(6.0, Unary(SIN, Var("x")))
        x = np.random.default_rng(0).uniform(-3, 3, 100)
        np.testing.assert_allclose(evaluate(s, {"x": x}), evaluate(e, {"x": x}), rtol=1e-12, atol=1e-12)

    def test_flattening(self):
        e = Sum((Var("x"), Sum((Var("y"), Sum((Const(1.0), Const(2.0)))))))
        assert simplify(e) == Sum((Var("x"), Var("y"), Const(3.0)))
        p = Product((Var("x"), Product((Var("y"), Scale(2.0, Var("x"))))))
        assert simplify(p) == Scale(2.0, Product((Var("x"), Var("y"), Var("x"))))

    def test_like_terms(self):
        e = Sum((Scale(2.0, Var("x")), Var("y"), Scale(-0.5, Var("x"))))
        assert simplify(e) == Sum((Scale(1.5, Var("x")), Var("y")))
        assert simplify(Sum((Var("x"), Scale(-1.0, Var("x"))))) == ZERO

    def test_multiply_by_zero(self):
        assert simplify(Product((Var("x"), Const(0.0)))) == ZERO

    def test_idempotent(self):
        e = Sum((Scale(2.0, Sum((Var("x"), Const(1.0)))), Product((Const(1.0), Unary(EXP, Var("y"))))))
        once = simplify(e)
        assert simplify(once) == once


class TestRender:
    def test_zero(self):
        assert render(Const(0.0)) == "0"
        assert render(Const(-0.0)) == "0"

    def test_powers(self):
        assert render(Unary(OperatorKind.POW2, Var("x"))) == "x^2"
        assert render(Unary(OperatorKind.POW3, Sum((Var("x"), Const(1.0))))) == "(x + 1)^3"
        assert render(Unary(OperatorKind.POW2, Scale(2.0, Var("x")))) == "(2*x)^2"

    def test_precision(self):
        e = Scale(3.14159265, Var("x"))
        assert render(e, 1) == "3*x"
        assert render(e, 5) == "3.1416*x"
        with pytest.raises(ValueError):
            render(e, 0)

    def test_negative_factors_parenthesized(self):
        e = Product((Scale(-2.0, Var("x")), Var("y")))
        assert render(e) == "(-2*x)*y"

    def test_subtraction(self):
        assert render(Sum((Var("x"), Scale(-2.0, Var("y")), Const(-1.0)))) == "x - 2*y - 1"


class TestPrefix:
    def test_round_trip(self):
        g, w = final_walkthrough_tree()
        e = simplify(extract(g, w))
        text = to_prefix(e)
        assert parse_prefix(text) == e
        assert to_prefix(parse_prefix(text)) == text

    def test_exact_constants(self):
        e = Scale(0.1 + 0.2, Var("x"))
        assert parse_prefix(to_prefix(e)).coef == 0.1 + 0.2

    @pytest.mark.parametrize("bad", ["(foo x)", "(sin x", "(scale x y)", ")", "(sum)", "(sin x y)", ""])
    def test_errors(self, bad):
        with pytest.raises(ValueError):
            parse_prefix(bad)


def test_helpers():
    e = Sum((Scale(2.0, Unary(LOG, Var("y"))), Var("x")))
    assert variables(e) == {"x", "y"}
    assert size(e) == 5
