"""Run configuration: one JSON document per experiment."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .aph import AphConfig
from .grammar import GrammarError, GrammarSpec, parse_grammar
from .optimizer import TrainConfig
from .pde_datasets import UnknownSystem, system_info
from .pruner import PruneConfig
from .serialization import config_hash

TOP_LEVEL_KEYS = {"system", "grammar", "depth", "outputs", "train", "prune", "dataset", "seed", "out"}
DATASET_KEYS = {"validation_fraction", "grid_points", "n_points", "reynolds", "nu", "eval_points", "aph"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputRun:
    name: str
    grammar: GrammarSpec
    depth: int


@dataclass(frozen=True)
class RunConfig:
    system: str
    outputs: tuple[OutputRun, ...]
    train: TrainConfig
    prune: PruneConfig
    dataset: dict
    seed: int
    out: Path
    normalized: dict  # canonical form used for hashing (no output directory)

    @property
    def hash(self) -> str:
        return config_hash(self.normalized)

    def output(self, name: str) -> OutputRun:
        for o in self.outputs:
            if o.name == name:
                return o
        raise KeyError(name)

    def aph_config(self) -> AphConfig | None:
        if self.system != "aph":
            return None
        opts = dict(self.dataset.get("aph", {}))
        for key in ("ntu", "pe", "inlet_temps", "grid"):
            if key in opts:
                opts[key] = tuple(opts[key])
        return AphConfig(**opts)


def _dataclass_from(cls, section: dict[str, Any], name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(sorted(unknown))}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} section: {exc}") from exc


def parse_run_config(doc: dict[str, Any], seed: int | None = None, out: str | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    if "system" not in doc:
        raise ConfigError("config needs a 'system'")
    try:
        info = system_info(doc["system"])
    except UnknownSystem as exc:
        raise ConfigError(exc.args[0]) from None

    seed = int(doc.get("seed", 0) if seed is None else seed)
    out_dir = Path(out if out is not None else doc.get("out", f"runs/{info.name}"))

    base_grammar = doc.get("grammar")
    base_depth = doc.get("depth")
    raw_outputs = doc.get("outputs", list(info.outputs))
    if isinstance(raw_outputs, list):
        raw_outputs = {name: {} for name in raw_outputs}
    if not isinstance(raw_outputs, dict) or not raw_outputs:
        raise ConfigError("'outputs' must be a non-empty list or mapping")

    outputs = []
    normalized_outputs = {}
    for name, entry in raw_outputs.items():
        if name not in info.outputs:
            raise ConfigError(f"system {info.name!r} has no output {name!r}")
        entry = entry or {}
        gdoc = entry.get("grammar", base_grammar)
        depth = entry.get("depth", base_depth)
        if gdoc is None or depth is None:
            raise ConfigError(f"output {name!r} needs a grammar and a depth")
        try:
            spec = parse_grammar(gdoc)
        except GrammarError as exc:
            raise ConfigError(f"grammar for {name!r}: {exc}") from exc
        stray = set(spec.terminals) - set(info.variables)
        if stray:
            raise ConfigError(
                f"terminal(s) {', '.join(sorted(stray))} are not variables of {info.name!r} "
                f"({', '.join(info.variables)})"
            )
        if not isinstance(depth, int) or depth < 0:
            raise ConfigError(f"depth for {name!r} must be a non-negative integer")
        outputs.append(OutputRun(name, spec, depth))
        normalized_outputs[name] = {"grammar": spec.to_dict(), "depth": depth}

    train_cfg = _dataclass_from(TrainConfig, dict(doc.get("train", {})), "train")
    prune_cfg = _dataclass_from(PruneConfig, dict(doc.get("prune", {})), "prune")
    dataset = dict(doc.get("dataset", {}))
    unknown = set(dataset) - DATASET_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) in dataset: {', '.join(sorted(unknown))}")

    normalized = {
        "system": info.name,
        "outputs": normalized_outputs,
        "train": {f.name: getattr(train_cfg, f.name) for f in fields(TrainConfig)},
        "prune": {f.name: getattr(prune_cfg, f.name) for f in fields(PruneConfig)},
        "dataset": dataset,
        "seed": seed,
    }
    run = RunConfig(info.name, tuple(outputs), train_cfg, prune_cfg, dataset, seed, out_dir, normalized)
    try:
        run.aph_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid aph section: {exc}") from exc
    return run


def load_run_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_run_config(doc, seed=seed, out=out)
