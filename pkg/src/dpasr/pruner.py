"""Depth-first magnitude pruning with fine-tuning.

Starting at the root, the traversal repeatedly picks the not-yet-visited live
summand of the current node with the smallest |weight| (ties: lowest summand
index).  Operator summands are recursed into first; then the summand's own
edge is tried.  Trying an edge zeroes and freezes it together with everything
beneath it, fine-tunes all remaining weights, and keeps the result only if the
score did not get worse.  The choice is made against the current weights, so
fine-tuning after an accepted prune can reorder the remaining siblings.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteLoss
from .metrics import relative_l2
from .optimizer import TrainConfig, TrainingDiverged, train
from .program_graph import NodeRecord, ProgramGraph, Summand, WeightStore, batch_forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PruneConfig:
    finetune_epochs: int = 500
    finetune_lr: float = 1e-3
    score_tolerance: float = 0.0
    seed: int = 0
    finetune_l1: float = 0.0

    def __post_init__(self):
        if self.finetune_epochs < 0:
            raise ValueError("finetune_epochs must be >= 0")
        if not self.finetune_lr > 0:
            raise ValueError("finetune_lr must be positive")
        if self.score_tolerance < 0:
            raise ValueError("score_tolerance must be >= 0")
        if self.finetune_l1 < 0:
            raise ValueError("finetune_l1 must be >= 0")


@dataclass(frozen=True)
class PruneAttempt:
    weight_index: int
    accepted: bool
    score: float  # NaN when fine-tuning diverged
    label: str = ""


@dataclass
class PruneResult:
    weights: WeightStore
    initial_score: float
    final_score: float
    attempts: list[PruneAttempt] = field(default_factory=list)

    @property
    def surviving_count(self) -> int:
        return self.weights.surviving_count

    @property
    def reduction_fraction(self) -> float:
        n = len(self.weights)
        return (n - self.surviving_count) / n

    def attempts_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["attempt_index", "weight_index", "accepted", "score", "edge"])
        for i, a in enumerate(self.attempts):
            writer.writerow([i, a.weight_index, int(a.accepted), format(a.score, ".17g"), a.label])
        return buf.getvalue()


def score(graph: ProgramGraph, weights: WeightStore, data) -> float:
    """Relative L2 error of the program on ``(inputs, targets)``."""
    inputs, targets = data
    return relative_l2(batch_forward(graph, weights, inputs), targets)


def pruning_order(graph: ProgramGraph, weights: WeightStore) -> list[int]:
    """Edge visiting order when every attempt is rejected (weights unchanged)."""
    order: list[int] = []

    def visit(node: NodeRecord) -> None:
        for s in _by_magnitude(node, weights):
            for child in s.children:
                visit(child)
            order.append(s.weight_index)

    visit(graph.root)
    return order


def _by_magnitude(node: NodeRecord, weights: WeightStore) -> list[Summand]:
    live = [s for s in node.summands if not weights.pruned[s.weight_index]]
    return sorted(live, key=lambda s: (abs(weights.values[s.weight_index]), s.weight_index))


def _edge_path(graph: ProgramGraph, weight_index: int) -> str:
    path: list[str] = []

    def find(node: NodeRecord) -> bool:
        for s in node.summands:
            if s.weight_index == weight_index:
                path.append(s.label())
                return True
            for child in s.children:
                if child.start <= weight_index < child.stop:
                    path.append(s.label())
                    return find(child)
        return False

    find(graph.root)
    return "root>" + ">".join(path)


def prune(
    graph: ProgramGraph,
    weights: WeightStore,
    data,
    config: PruneConfig = PruneConfig(),
    finetune_data=None,
) -> PruneResult:
    """Prune ``weights`` against the scoring split ``data``.

    ``finetune_data`` is the ``(inputs, targets)`` pair fine-tuning fits; it
    defaults to ``data``.  Fine-tuning checkpoints on ``data``.
    """
    if finetune_data is None:
        finetune_data = data
    tune_cfg = None
    if config.finetune_epochs > 0:
        tune_cfg = TrainConfig(
            max_epochs=config.finetune_epochs,
            initial_lr=config.finetune_lr,
            lr_decay_factor=1.0,
            lr_decay_every=config.finetune_epochs,
            l1_coefficient=config.finetune_l1,
            early_stop_patience=config.finetune_epochs,
            seed=config.seed,
        )

    current = weights.copy()
    initial = score(graph, current, data)
    best = initial
    attempts: list[PruneAttempt] = []

    def attempt(s: Summand) -> None:
        nonlocal current, best
        trial = current.copy()
        trial.prune([s.weight_index, *s.subtree_indices()])
        label = _edge_path(graph, s.weight_index)
        try:
            if tune_cfg is not None:
                trial, _ = train(graph, trial, finetune_data, data, tune_cfg)
            new = score(graph, trial, data)
        except (TrainingDiverged, NonFiniteLoss) as exc:
            log.info("prune of %s rejected: %s", label, exc)
            attempts.append(PruneAttempt(s.weight_index, False, math.nan, label))
            return
        ok = bool(np.isfinite(new)) and new <= best + config.score_tolerance
        attempts.append(PruneAttempt(s.weight_index, ok, float(new), label))
        log.debug("prune %s: score %.4e vs %.4e -> %s", label, new, best, ok)
        if ok:
            current, best = trial, new

    def visit(node: NodeRecord) -> None:
        visited: set[int] = set()
        while True:
            pending = [s for s in _by_magnitude(node, current) if s.weight_index not in visited]
            if not pending:
                return
            s = pending[0]
            visited.add(s.weight_index)
            for child in s.children:
                visit(child)
            if not current.pruned[s.weight_index]:
                attempt(s)

    visit(graph.root)
    return PruneResult(current, initial, best, attempts)
