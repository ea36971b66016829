"""Evaluation metrics and the results-table report."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np


class MetricError(ValueError):
    pass


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape:
        raise MetricError(f"length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    if pred.size == 0:
        raise MetricError("empty arrays")
    return pred, truth


def relative_l2(pred, truth) -> float:
    """||pred - truth||_2 / ||truth||_2."""
    pred, truth = _pair(pred, truth)
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise MetricError("relative L2 undefined for an all-zero truth vector")
    return float(np.linalg.norm(pred - truth) / denom)


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


@dataclass
class EvalReport:
    system: str
    output: str
    variant: str  # "unpruned" or "pruned"
    relative_l2: float
    mae: float
    surviving_params: int
    unpruned_params: int
    headline_metric: str  # "relative_l2" or "mae"
    expression_text: str = ""

    def __post_init__(self):
        if not 0 <= self.surviving_params <= self.unpruned_params:
            raise MetricError("surviving_params must lie in [0, unpruned_params]")

    @property
    def reduction_fraction(self) -> float:
        return 1.0 - self.surviving_params / self.unpruned_params

    @property
    def headline(self) -> float:
        return self.mae if self.headline_metric == "mae" else self.relative_l2


RESULTS_COLUMNS = [
    "system",
    "output",
    "variant",
    "headline_metric",
    "headline",
    "relative_l2",
    "mae",
    "unpruned_params",
    "surviving_params",
    "reduction_fraction",
]


def results_csv(reports: list[EvalReport]) -> str:
    """Results table with one DPA-Unpruned and one DPA-Pruned row per output."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULTS_COLUMNS)
    for r in reports:
        row = asdict(r)
        row["headline"] = r.headline
        row["reduction_fraction"] = r.reduction_fraction
        writer.writerow([_fmt(row[c]) for c in RESULTS_COLUMNS])
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".6e")
    return value
