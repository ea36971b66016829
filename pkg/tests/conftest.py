from __future__ import annotations

import numpy as np
import pytest

from dpasr.grammar import parse_grammar
from dpasr.program_graph import WeightStore, build_graph

DIFFUSION = {"unary": ["sin", "exp"], "binary": ["+", "*"], "terminals": ["x", "t"], "constant": True}
KOVASZNAY = {
    "unary": ["sin", "exp", "log", "pow2", "pow3"],
    "binary": ["+", "*"],
    "terminals": ["x", "y"],
    "constant": True,
}
ALL_OPS = ["sin", "exp", "log", "pow2", "pow3"]


@pytest.fixture
def diffusion_spec():
    return parse_grammar(DIFFUSION)


@pytest.fixture
def kovasznay_spec():
    return parse_grammar(KOVASZNAY)


def random_spec(rng: np.random.Generator, terminals=("x", "y")):
    unary = [op for op in ALL_OPS if rng.random() < 0.5]
    binary = [op for op in ("+", "*") if rng.random() < 0.5]
    return parse_grammar(
        {
            "unary": unary,
            "binary": binary,
            "terminals": list(terminals),
            "constant": bool(rng.random() < 0.7),
        }
    )


def find_summand(node, label):
    """First summand at ``node`` whose label is ``label``."""
    for s in node.summands:
        if s.label() == label:
            return s
    raise KeyError(label)


def figure_fixture():
    """Depth-2 {sin, exp, log} / {x, y, 1} tree carrying the walkthrough weights.

    Edges the walkthrough does not draw are treated as already pruned.
    """
    spec = parse_grammar({"unary": ["sin", "exp", "log"], "binary": [], "terminals": ["x", "y"]})
    g = build_graph(spec, 2)
    values = np.zeros(g.weight_count)
    keep = []

    def put(node, label, value):
        s = find_summand(node, label)
        values[s.weight_index] = value
        keep.append(s.weight_index)
        return s

    root = g.root
    r_sin = put(root, "sin", -0.34)
    r_exp = put(root, "exp", 0.16)
    r_log = put(root, "log", -3.71)
    for branch in (r_sin, r_log):
        node = branch.children[0]
        for label, value in (("sin", 0.8), ("exp", 0.9), ("log", 1.1)):
            leaf = put(node, label, value).children[0]
            put(leaf, "x", 0.5)
    e = r_exp.children[0]
    e_sin = put(e, "sin", -1.37)
    e_exp = put(e, "exp", 1.24)
    e_log = put(e, "log", -0.05)
    for label, value in (("x", 0.27), ("y", -0.55), ("1", 0.62)):
        put(e_sin.children[0], label, value)
    put(e_exp.children[0], "y", 0.4)
    for label, value in (("x", 1.19), ("y", 2.32), ("1", 0.35)):
        put(e_log.children[0], label, value)
    pruned = np.ones(g.weight_count, dtype=bool)
    pruned[keep] = False
    return g, WeightStore(values, pruned), find_summand(e_log.children[0], "1").weight_index


def planted_diffusion():
    """0.3 x + [exp(-0.8 t)] * [1.5 sin(2 x)] inside the depth-2 diffusion tree."""
    spec = parse_grammar({"unary": ["sin", "exp"], "binary": ["+", "*"], "terminals": ["x", "t"]})
    g = build_graph(spec, 2)
    w = np.zeros(g.weight_count)
    mul = find_summand(g.root, "multiply")
    w[mul.weight_index] = 1.0
    w[find_summand(g.root, "x").weight_index] = 0.3
    a, b = mul.children
    ea = find_summand(a, "exp")
    w[ea.weight_index] = 1.0
    w[find_summand(ea.children[0], "t").weight_index] = -0.8
    sb = find_summand(b, "sin")
    w[sb.weight_index] = 1.5
    w[find_summand(sb.children[0], "x").weight_index] = 2.0
    return g, WeightStore(w)


# -- acceptance reporting ---------------------------------------------------

_ACCEPTANCE: list[tuple[int, str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = marker.args
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        _ACCEPTANCE.append((number, title, status, getattr(item, "acceptance_detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, status, detail in sorted(_ACCEPTANCE):
        line = f"criterion {number} [{status}] {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
