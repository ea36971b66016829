"""Depth-bounded program derivation trees (the differentiable architecture).

Every node holds one weighted summand per production of the grammar.  Unary
summands own one child node and binary summands own two; nodes at the maximum
depth hold only terminal (and constant) summands.  Children are never shared,
so the weight count follows

    P(D) = n_t + c
    P(d) = (n_u + n_b + n_t + c) + (n_u + 2 n_b) P(d + 1)

Weights are laid out depth-first: a node's summands take a contiguous block of
indices, followed by the subtrees of its children in summand order.  Every
subtree therefore occupies a contiguous index range.

Besides the explicit node tree, the graph keeps per-level index arrays so the
forward pass is evaluated one level at a time over a whole batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .grammar import GrammarSpec, OperatorKind
from .ops import apply_binary, apply_unary

DEFAULT_PARAMETER_LIMIT = 10**7


class ArchitectureTooLarge(ValueError):
    pass


class GraphInputError(ValueError):
    pass


@dataclass(frozen=True)
class Summand:
    kind: str  # "unary", "binary", "terminal" or "constant"
    weight_index: int
    op: OperatorKind | None = None
    terminal: str | None = None
    children: tuple["NodeRecord", ...] = ()

    @property
    def is_operator(self) -> bool:
        return self.kind in ("unary", "binary")

    def subtree_indices(self) -> range:
        """Weight indices strictly beneath this edge (empty for leaves)."""
        if not self.children:
            return range(0)
        return range(self.children[0].start, self.children[-1].stop)

    def label(self) -> str:
        if self.op is not None:
            return self.op.value
        if self.kind == "terminal":
            return self.terminal
        return "1"


@dataclass(frozen=True)
class NodeRecord:
    depth: int
    position: int  # index of this node within its level
    start: int  # first weight index in this node's subtree
    stop: int
    summands: tuple[Summand, ...] = field(repr=False)

    def walk(self) -> Iterator["NodeRecord"]:
        yield self
        for s in self.summands:
            for child in s.children:
                yield from child.walk()


@dataclass(frozen=True)
class _Level:
    unary: np.ndarray  # (n_nodes, n_unary) weight indices
    binary: np.ndarray  # (n_nodes, n_binary)
    terminal: np.ndarray  # (n_nodes, n_terminals)
    constant: np.ndarray | None  # (n_nodes,)

    @property
    def n_nodes(self) -> int:
        return self.terminal.shape[0]

    @property
    def slot_owner(self) -> np.ndarray:
        """Weight index of the summand owning each child slot, (n_nodes, n_children)."""
        return np.concatenate([self.unary, np.repeat(self.binary, 2, axis=1)], axis=1)

    def select(self, rows: np.ndarray | None) -> "_Level":
        if rows is None:
            return self
        return _Level(
            self.unary[rows],
            self.binary[rows],
            self.terminal[rows],
            None if self.constant is None else self.constant[rows],
        )


def count_parameters(spec: GrammarSpec, depth: int) -> int:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    per_node = spec.n_unary + spec.n_binary + spec.n_leaf_summands
    total = spec.n_leaf_summands
    for _ in range(depth):
        total = per_node + spec.n_children * total
    return total


class ProgramGraph:
    """Immutable program tree for a grammar expanded to ``depth``."""

    def __init__(self, spec: GrammarSpec, depth: int, root: NodeRecord, levels: list[_Level]):
        self.spec = spec
        self.depth = depth
        self.root = root
        self.levels = levels
        self.weight_count = root.stop
        self._summand_by_index: dict[int, Summand] | None = None

    def __repr__(self) -> str:
        return f"ProgramGraph(depth={self.depth}, weight_count={self.weight_count})"

    def nodes(self) -> Iterator[NodeRecord]:
        return self.root.walk()

    def summand(self, weight_index: int) -> Summand:
        if self._summand_by_index is None:
            self._summand_by_index = {
                s.weight_index: s for node in self.nodes() for s in node.summands
            }
        return self._summand_by_index[weight_index]

    def node_of(self, weight_index: int) -> NodeRecord:
        for node in self.nodes():
            for s in node.summands:
                if s.weight_index == weight_index:
                    return node
        raise KeyError(weight_index)


def build_graph(spec: GrammarSpec, depth: int, limit: int = DEFAULT_PARAMETER_LIMIT) -> ProgramGraph:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    total = count_parameters(spec, depth)
    if total > limit:
        raise ArchitectureTooLarge(
            f"depth {depth} architecture has {total} parameters (limit {limit})"
        )

    n_u, n_b, n_t = spec.n_unary, spec.n_binary, spec.n_terminals
    fan = spec.n_children
    levels_n = [fan**d for d in range(depth + 1)]
    idx_u = [np.zeros((n, n_u), dtype=np.int64) for n in levels_n]
    idx_b = [np.zeros((n, n_b), dtype=np.int64) for n in levels_n]
    idx_t = [np.zeros((n, n_t), dtype=np.int64) for n in levels_n]
    idx_c = [np.zeros(n, dtype=np.int64) for n in levels_n]
    counter = 0

    def make(d: int, pos: int) -> NodeRecord:
        nonlocal counter
        start = counter
        internal = d < depth
        # reserve this node's summand block first
        slots = []
        if internal:
            for k, op in enumerate(spec.unary):
                slots.append(("unary", op, None, counter))
                idx_u[d][pos, k] = counter
                counter += 1
            for k, op in enumerate(spec.binary):
                slots.append(("binary", op, None, counter))
                idx_b[d][pos, k] = counter
                counter += 1
        for k, name in enumerate(spec.terminals):
            slots.append(("terminal", None, name, counter))
            idx_t[d][pos, k] = counter
            counter += 1
        if spec.include_constant:
            slots.append(("constant", None, None, counter))
            idx_c[d][pos] = counter
            counter += 1

        summands = []
        child_slot = 0
        for kind, op, name, wi in slots:
            children: tuple[NodeRecord, ...] = ()
            if kind == "unary":
                children = (make(d + 1, pos * fan + child_slot),)
                child_slot += 1
            elif kind == "binary":
                first = make(d + 1, pos * fan + child_slot)
                second = make(d + 1, pos * fan + child_slot + 1)
                children = (first, second)
                child_slot += 2
            summands.append(Summand(kind, wi, op, name, children))
        return NodeRecord(d, pos, start, counter, tuple(summands))

    root = make(0, 0)
    assert root.stop == total
    levels = [
        _Level(idx_u[d], idx_b[d], idx_t[d], idx_c[d] if spec.include_constant else None)
        for d in range(depth + 1)
    ]
    return ProgramGraph(spec, depth, root, levels)


class WeightStore:
    """Flat weight vector plus a pruned mask.  Pruned entries are held at 0."""

    def __init__(self, values, pruned=None):
        self.values = np.array(values, dtype=np.float64)
        if pruned is None:
            pruned = np.zeros(self.values.shape, dtype=bool)
        self.pruned = np.array(pruned, dtype=bool)
        if self.pruned.shape != self.values.shape:
            raise ValueError("mask and values differ in shape")
        self.apply_mask()

    @classmethod
    def zeros(cls, graph: ProgramGraph) -> "WeightStore":
        return cls(np.zeros(graph.weight_count))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.pruned, other.pruned)
        )

    def copy(self) -> "WeightStore":
        return WeightStore(self.values.copy(), self.pruned.copy())

    def apply_mask(self) -> None:
        self.values[self.pruned] = 0.0

    def prune(self, indices) -> None:
        self.pruned[np.asarray(indices, dtype=np.int64)] = True
        self.apply_mask()

    @property
    def surviving_count(self) -> int:
        return int((~self.pruned).sum())


def input_columns(spec: GrammarSpec, inputs) -> np.ndarray:
    """Normalise batch inputs to an array of shape (n_terminals, n_rows).

    ``inputs`` is either a mapping from terminal name to a column, or a 2-D
    array whose columns follow ``spec.terminals``.
    """
    if isinstance(inputs, Mapping):
        missing = [t for t in spec.terminals if t not in inputs]
        if missing:
            raise GraphInputError(f"missing value for terminal(s): {', '.join(missing)}")
        cols = np.array(
            [np.asarray(inputs[t], dtype=np.float64).reshape(-1) for t in spec.terminals]
        )
    else:
        arr = np.asarray(inputs, dtype=np.float64)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, spec.n_terminals)
        if arr.ndim != 2 or arr.shape[1] != spec.n_terminals:
            raise GraphInputError(
                f"expected inputs of shape (rows, {spec.n_terminals}), got {arr.shape}"
            )
        cols = np.ascontiguousarray(arr.T)
    if not np.all(np.isfinite(cols)):
        raise GraphInputError("non-finite input value")
    return cols


def live_nodes(graph: ProgramGraph, pruned: np.ndarray) -> list[np.ndarray] | None:
    """Per level, positions of nodes reachable from the root through unpruned
    edges, or None when nothing is pruned.

    Nodes cut off by a pruned edge contribute ``0 * op(value)`` to their parent,
    so they can be skipped without changing any live value.
    """
    if not pruned.any():
        return None
    m = graph.spec.n_children
    live = [np.zeros(1, dtype=np.int64)]
    for d in range(graph.depth):
        rows = live[d]
        ok = ~pruned[graph.levels[d].slot_owner[rows]]
        pos = rows[:, None] * m + np.arange(m)
        live.append(pos[ok])
    return live


@dataclass
class LevelCache:
    rows: np.ndarray | None  # evaluated node positions (None: all)
    children: np.ndarray | None  # (n_rows, n_children, n_samples)
    unary_out: list[np.ndarray]  # op(child) per unary operator


def evaluate_levels(
    graph: ProgramGraph,
    w: np.ndarray,
    cols: np.ndarray,
    live: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, list[LevelCache]]:
    """Bottom-up level evaluation over a batch.

    ``cols`` has shape (n_terminals, n_samples).  Returns the root values and
    per-level caches used by the backward pass.
    """
    spec = graph.spec
    n_samples = cols.shape[1]
    m = spec.n_children
    n_u = spec.n_unary
    caches: list[LevelCache] = [None] * (graph.depth + 1)
    values = None
    for d in range(graph.depth, -1, -1):
        full = graph.levels[d]
        rows = None if live is None else live[d]
        lvl = full.select(rows)
        acc = np.zeros((lvl.n_nodes, n_samples))
        tmp = np.empty_like(acc)
        c = None
        unary_out = []
        if d < graph.depth:
            c = values.reshape(full.n_nodes, m, n_samples)
            if rows is not None:
                c = c[rows]
            for k, op in enumerate(spec.unary):
                v = apply_unary(op, c[:, k])
                unary_out.append(v)
                np.multiply(w[lvl.unary[:, k]][:, None], v, out=tmp)
                acc += tmp
            for k, op in enumerate(spec.binary):
                j = n_u + 2 * k
                np.multiply(w[lvl.binary[:, k]][:, None], apply_binary(op, c[:, j], c[:, j + 1]), out=tmp)
                acc += tmp
        for k in range(spec.n_terminals):
            np.multiply(w[lvl.terminal[:, k]][:, None], cols[k][None, :], out=tmp)
            acc += tmp
        if lvl.constant is not None:
            acc += w[lvl.constant][:, None]
        caches[d] = LevelCache(rows, c, unary_out)
        if rows is None:
            values = acc
        else:
            values = np.zeros((full.n_nodes, n_samples))
            values[rows] = acc
    return values[0], caches


def batch_forward(graph: ProgramGraph, weights: WeightStore, inputs) -> np.ndarray:
    cols = input_columns(graph.spec, inputs)
    out, _ = evaluate_levels(graph, weights.values, cols, live_nodes(graph, weights.pruned))
    return out


def forward(graph: ProgramGraph, weights: WeightStore, record: Mapping[str, float]) -> float:
    """Evaluate the program at a single coordinate record."""
    missing = [t for t in graph.spec.terminals if t not in record]
    if missing:
        raise GraphInputError(f"missing value for terminal(s): {', '.join(missing)}")
    row = np.array([[float(record[t]) for t in graph.spec.terminals]])
    return float(batch_forward(graph, weights, row)[0])
