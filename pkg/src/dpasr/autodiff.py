"""Reverse-mode gradient of the regularised MSE loss of a program graph.

The backward sweep walks the levels top-down.  At each level the adjoint of
every node value is known; it is pushed onto that node's weights and, through
the operator derivatives, onto the child node values of the next level.
"""

from __future__ import annotations

import numpy as np

from .grammar import OperatorKind
from .ops import unary_derivative
from .program_graph import (
    ProgramGraph,
    WeightStore,
    evaluate_levels,
    input_columns,
    live_nodes,
)


class NonFiniteLoss(FloatingPointError):
    def __init__(self, sample_index: int):
        super().__init__(f"non-finite prediction at sample {sample_index}")
        self.sample_index = sample_index


def loss_and_grad(
    graph: ProgramGraph,
    weights: WeightStore,
    inputs,
    targets,
    l1_coefficient: float = 0.0,
    cols: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """MSE + l1 * sum|w| over unpruned weights, and its gradient.

    ``cols`` may carry pre-normalised inputs (see ``input_columns``) to skip
    re-validation inside training loops.
    """
    if l1_coefficient < 0:
        raise ValueError("l1_coefficient must be non-negative")
    if cols is None:
        cols = input_columns(graph.spec, inputs)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = cols.shape[1]
    if n == 0 or y.shape[0] != n:
        raise ValueError(f"need equal, non-zero row counts (inputs {n}, targets {y.shape[0]})")

    w = weights.values
    live = live_nodes(graph, weights.pruned)
    pred, caches = evaluate_levels(graph, w, cols, live)
    resid = pred - y
    bad = ~np.isfinite(resid)
    if bad.any():
        raise NonFiniteLoss(int(np.argmax(bad)))
    active = ~weights.pruned
    loss = float(np.dot(resid, resid) / n + l1_coefficient * np.abs(w[active]).sum())

    grad = np.zeros_like(w)
    spec = graph.spec
    n_u = spec.n_unary
    adj = (2.0 / n) * resid[None, :]  # adjoint of the evaluated nodes of this level
    for d, cache in enumerate(caches):
        lvl = graph.levels[d].select(cache.rows)
        for k in range(spec.n_terminals):
            grad[lvl.terminal[:, k]] = adj @ cols[k]
        if lvl.constant is not None:
            grad[lvl.constant] = adj.sum(axis=1)
        if d == graph.depth:
            break
        c = cache.children
        child_adj = np.empty_like(c)
        for k, op in enumerate(spec.unary):
            a = c[:, k]
            v = cache.unary_out[k]
            grad[lvl.unary[:, k]] = np.einsum("ij,ij->i", adj, v)
            wk = w[lvl.unary[:, k]][:, None]
            child_adj[:, k] = adj * wk * unary_derivative(op, a, v)
        for k, op in enumerate(spec.binary):
            j = n_u + 2 * k
            a, b = c[:, j], c[:, j + 1]
            wk = w[lvl.binary[:, k]][:, None]
            if op is OperatorKind.ADD:
                grad[lvl.binary[:, k]] = np.einsum("ij,ij->i", adj, a + b)
                child_adj[:, j] = adj * wk
                child_adj[:, j + 1] = child_adj[:, j]
            else:
                grad[lvl.binary[:, k]] = np.einsum("ij,ij->i", adj, a * b)
                child_adj[:, j] = adj * wk * b
                child_adj[:, j + 1] = adj * wk * a
        child_adj = child_adj.reshape(-1, n)
        if cache.rows is not None:
            # keep only children reached through unpruned edges, in live order
            ok = active[graph.levels[d].slot_owner[cache.rows]].reshape(-1)
            child_adj = child_adj[ok]
        adj = child_adj

    if l1_coefficient:
        # subgradient of |w| at 0 taken as 0
        grad += l1_coefficient * np.sign(w)
    grad[weights.pruned] = 0.0
    return loss, grad
