"""Symbolic regression for PDE solutions via pruned differentiable program architectures."""

from .grammar import GrammarSpec, OperatorKind, parse_grammar
from .program_graph import ProgramGraph, WeightStore, batch_forward, build_graph, count_parameters, forward
from .autodiff import loss_and_grad
from .optimizer import TrainConfig, TrainReport, glorot_init, train
from .pruner import PruneConfig, PruneResult, prune
from .symbolic import extract, render, simplify
from .metrics import EvalReport, mae, relative_l2
from .pde_datasets import Dataset, evaluation_set, sample_dataset

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EvalReport",
    "GrammarSpec",
    "OperatorKind",
    "ProgramGraph",
    "PruneConfig",
    "PruneResult",
    "TrainConfig",
    "TrainReport",
    "WeightStore",
    "batch_forward",
    "build_graph",
    "count_parameters",
    "evaluation_set",
    "extract",
    "forward",
    "glorot_init",
    "loss_and_grad",
    "mae",
    "parse_grammar",
    "prune",
    "relative_l2",
    "render",
    "sample_dataset",
    "simplify",
    "train",
]
