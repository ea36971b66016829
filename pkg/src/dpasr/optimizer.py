"""Full-batch Adam training with step decay, L1 and early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteLoss, loss_and_grad
from .metrics import relative_l2
from .program_graph import ProgramGraph, WeightStore, evaluate_levels, input_columns, live_nodes

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, detail: str = ""):
        msg = f"training diverged at epoch {epoch}"
        super().__init__(f"{msg}: {detail}" if detail else msg)
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100_000
    initial_lr: float = 1e-2
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 25_000
    l1_coefficient: float = 1e-5
    early_stop_patience: int = 5_000
    seed: int = 0
    batch_mode: str = "full-batch"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.initial_lr > 0:
            raise ValueError("initial_lr must be positive")
        if not 0 < self.lr_decay_factor <= 1:
            raise ValueError("lr_decay_factor must be in (0, 1]")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if self.l1_coefficient < 0:
            raise ValueError("l1_coefficient must be non-negative")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be non-negative")
        if self.batch_mode != "full-batch":
            raise ValueError("only full-batch training is supported")

    def lr_at(self, epoch: int) -> float:
        """Learning rate used for the (1-based) ``epoch``."""
        return self.initial_lr * self.lr_decay_factor ** ((epoch - 1) // self.lr_decay_every)


@dataclass
class TrainReport:
    epochs_run: int
    best_validation_score: float
    best_epoch: int
    stop_reason: str  # "max_epochs" or "early_stop"
    loss_history: list[tuple[float, float]] = field(default_factory=list, repr=False)
    lr_history: list[float] = field(default_factory=list, repr=False)

    def curve_rows(self):
        for i, ((train_loss, val), lr) in enumerate(zip(self.loss_history, self.lr_history), 1):
            yield i, train_loss, val, lr


class Adam:
    def __init__(self, size: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def glorot_init(graph: ProgramGraph, seed: int) -> WeightStore:
    """Uniform(-b, b) per node, b = sqrt(6 / (summands at node + 1))."""
    bounds = np.empty(graph.weight_count)
    for node in graph.nodes():
        bounds[[s.weight_index for s in node.summands]] = np.sqrt(6.0 / (len(node.summands) + 1))
    rng = np.random.default_rng(seed)
    return WeightStore(rng.uniform(-1.0, 1.0, graph.weight_count) * bounds)


def _split(data):
    inputs, targets = data
    return inputs, np.asarray(targets, dtype=np.float64).reshape(-1)


def train(
    graph: ProgramGraph,
    weights: WeightStore,
    train_data,
    validation_data,
    config: TrainConfig,
) -> tuple[WeightStore, TrainReport]:
    """Train ``weights`` (not modified in place) and return the best checkpoint.

    ``train_data`` and ``validation_data`` are ``(inputs, targets)`` pairs.  Each
    epoch records the train loss and validation relative-L2 of the current
    weights, then takes one Adam step; the weights with the lowest validation
    score seen are returned.
    """
    x_tr, y_tr = _split(train_data)
    x_va, y_va = _split(validation_data)
    cols_tr = input_columns(graph.spec, x_tr)
    cols_va = input_columns(graph.spec, x_va)
    if cols_tr.shape[1] == 0 or cols_va.shape[1] == 0:
        raise ValueError("train and validation sets must be non-empty")

    w = weights.copy()
    active = ~w.pruned
    live = live_nodes(graph, w.pruned)
    opt = Adam(len(w))
    history: list[tuple[float, float]] = []
    lrs: list[float] = []
    best_score = np.inf
    best_values = w.values.copy()
    best_epoch = 0
    stop_reason = "max_epochs"
    epoch = 0

    def validation_score() -> float:
        pred, _ = evaluate_levels(graph, w.values, cols_va, live)
        return relative_l2(pred, y_va)

    for epoch in range(1, config.max_epochs + 1):
        try:
            loss, grad = loss_and_grad(
                graph, w, None, y_tr, config.l1_coefficient, cols=cols_tr
            )
        except NonFiniteLoss as exc:
            raise TrainingDiverged(epoch, str(exc)) from exc
        val = validation_score()
        if not np.isfinite(val):
            raise TrainingDiverged(epoch, "non-finite validation score")
        history.append((loss, val))
        lr = config.lr_at(epoch)
        lrs.append(lr)
        if val < best_score:
            best_score, best_values, best_epoch = val, w.values.copy(), epoch
        elif epoch - best_epoch >= config.early_stop_patience:
            stop_reason = "early_stop"
            break
        opt.step(w.values, grad, lr)
        w.values[~active] = 0.0

    log.debug("train stopped at epoch %d (%s), best %.3e", epoch, stop_reason, best_score)
    result = WeightStore(best_values, w.pruned.copy())
    report = TrainReport(
        epochs_run=epoch,
        best_validation_score=float(best_score),
        best_epoch=best_epoch,
        stop_reason=stop_reason,
        loss_history=history,
        lr_history=lrs,
    )
    return result, report
