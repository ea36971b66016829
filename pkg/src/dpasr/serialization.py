"""Model files and provenance helpers."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .grammar import parse_grammar
from .program_graph import ProgramGraph, WeightStore, build_graph

SCHEMA_VERSION = 1
_PLACEHOLDER = '"__WEIGHTS__"'


class ModelFormatError(ValueError):
    pass


def config_hash(config: dict[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def provenance_line(chash: str) -> str:
    """Leading comment line for CSV artifacts."""
    return f"# dpasr schema_version={SCHEMA_VERSION} config_hash={chash}\n"


def strip_comments(text: str) -> str:
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def model_to_json(graph: ProgramGraph, weights: WeightStore, meta: dict[str, Any] | None = None) -> str:
    record = {
        "schema_version": SCHEMA_VERSION,
        **(meta or {}),
        "grammar": graph.spec.to_dict(),
        "depth": graph.depth,
        "weight_count": graph.weight_count,
        "pruned": [int(p) for p in weights.pruned],
        "weights": "__WEIGHTS__",
    }
    text = json.dumps(record, indent=1)
    # 17 significant digits: bit-exact round trip for every double
    numbers = ", ".join(format(float(v), ".17g") for v in weights.values)
    return text.replace(_PLACEHOLDER, f"[{numbers}]") + "\n"


def model_from_json(text: str) -> tuple[ProgramGraph, WeightStore, dict[str, Any]]:
    record = json.loads(text)
    if record.get("schema_version") != SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema_version {record.get('schema_version')!r}")
    spec = parse_grammar(record["grammar"])
    graph = build_graph(spec, int(record["depth"]))
    values = np.array(record["weights"], dtype=np.float64)
    pruned = np.array(record["pruned"], dtype=bool)
    if values.shape != (graph.weight_count,) or pruned.shape != values.shape:
        raise ModelFormatError("weight vector does not match the architecture")
    meta = {
        k: v
        for k, v in record.items()
        if k not in ("schema_version", "grammar", "depth", "weight_count", "pruned", "weights")
    }
    return graph, WeightStore(values, pruned), meta


def save_model(path, graph: ProgramGraph, weights: WeightStore, meta: dict[str, Any] | None = None) -> None:
    Path(path).write_text(model_to_json(graph, weights, meta))


def load_model(path) -> tuple[ProgramGraph, WeightStore, dict[str, Any]]:
    return model_from_json(Path(path).read_text())
