"""End-to-end stages: dataset -> train -> prune -> extract/report.

Each stage reads the artifacts of the previous one from the run directory, so
stages can be re-run individually.  Artifacts carry the schema version and the
config hash, and contain nothing time- or host-dependent, so identical configs
reproduce identical bytes.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import OutputRun, RunConfig
from .metrics import EvalReport, mae, relative_l2, results_csv
from .optimizer import glorot_init, train
from .pde_datasets import Dataset, evaluation_set, sample_dataset, system_info
from .program_graph import batch_forward, build_graph
from .pruner import prune
from .serialization import (
    SCHEMA_VERSION,
    load_model,
    provenance_line,
    save_model,
    strip_comments,
)
from .symbolic import extract, render, simplify, size, to_prefix

log = logging.getLogger(__name__)


class MissingArtifact(FileNotFoundError):
    pass


NOT_REPRODUCED = """\
## Not reproduced

- PINN column: no PINN is trained here. Training data comes from the analytic
  solutions and the finite-difference air-preheater solver instead.
- AI-Feynman, SymbolicGPT and DSR columns: these baselines are not implemented.
- Air-preheater MAE magnitudes: the NTU, Peclet and inlet-temperature values
  behind the published numbers are not available. The solver defaults
  (NTU = 5, Pe = 50, T_in = (1, 0, 0)) give a different temperature scale, so the
  MAE values here are not comparable.
"""


# -- paths --------------------------------------------------------------------


def _paths(run: RunConfig) -> dict[str, Path]:
    out = run.out
    return {
        "dataset": out / "dataset.csv",
        "evaluation": out / "evaluation.csv",
        "manifest": out / "dataset_manifest.json",
        "models": out / "models",
        "curves": out / "curves",
        "prune": out / "prune",
        "expressions": out / "expressions.json",
        "expressions_txt": out / "expressions.txt",
        "results": out / "results.csv",
        "report": out / "report.md",
    }


def model_path(run: RunConfig, output: str, stage: str) -> Path:
    return run.out / "models" / f"{output}.{stage}.json"


def _write_csv(path: Path, run: RunConfig, body: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(provenance_line(run.hash) + body)


def _json_dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _meta(run: RunConfig, output: str, stage: str, **extra) -> dict:
    return {"config_hash": run.hash, "system": run.system, "output": output, "stage": stage, **extra}


def load_dataset(run: RunConfig, which: str = "dataset") -> Dataset:
    path = _paths(run)[which]
    if not path.exists():
        raise MissingArtifact(f"{path} not found; run the 'dataset' stage first")
    return Dataset.from_csv(strip_comments(path.read_text()), run.system)


def _load_stage_model(run: RunConfig, output: str, stage: str):
    path = model_path(run, output, stage)
    if not path.exists():
        hint = "train" if stage == "unpruned" else "prune"
        raise MissingArtifact(f"{path} not found; run the '{hint}' stage first")
    return load_model(path)


def _map(fn, jobs, parallel: bool):
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


# -- stages -------------------------------------------------------------------


def cmd_dataset(run: RunConfig) -> Dataset:
    opts = run.dataset
    common = {k: opts[k] for k in ("reynolds", "nu") if k in opts}
    ds = sample_dataset(
        run.system,
        seed=run.seed,
        validation_fraction=opts.get("validation_fraction", 0.1),
        grid_points=opts.get("grid_points", 101),
        n_points=opts.get("n_points", 25_000),
        aph_config=run.aph_config(),
        **common,
    )
    ev = evaluation_set(
        run.system,
        n=opts.get("eval_points", 10_000),
        seed=run.seed,
        aph_config=run.aph_config(),
        **common,
    )
    paths = _paths(run)
    _write_csv(paths["dataset"], run, ds.to_csv())
    _write_csv(paths["evaluation"], run, ev.to_csv())
    _json_dump(
        paths["manifest"],
        {
            "schema_version": SCHEMA_VERSION,
            "config_hash": run.hash,
            "system": run.system,
            "seed": run.seed,
            "rows": len(ds),
            "counts": {s: ds.count(s) for s in ("train", "validation", "test")},
            "evaluation_rows": len(ev),
            "outputs": list(ds.outputs),
            "meta": ds.meta,
        },
    )
    log.info("dataset: %d rows, %d evaluation rows", len(ds), len(ev))
    return ds


def _train_job(job):
    run, out = job
    ds = load_dataset(run)
    graph = build_graph(out.grammar, out.depth)
    w0 = glorot_init(graph, [run.seed, run.outputs.index(out)])
    weights, report = train(
        graph, w0, ds.pair(out.name, "train"), ds.pair(out.name, "validation"), run.train
    )
    save_model(
        model_path(run, out.name, "unpruned"),
        graph,
        weights,
        _meta(
            run,
            out.name,
            "unpruned",
            epochs_run=report.epochs_run,
            stop_reason=report.stop_reason,
            best_validation_rel_l2=report.best_validation_score,
        ),
    )
    body = "epoch,train_loss,val_rel_l2,lr\n" + "".join(
        f"{e},{loss:.17g},{val:.17g},{lr:.17g}\n" for e, loss, val, lr in report.curve_rows()
    )
    _write_csv(run.out / "curves" / f"{out.name}.train.csv", run, body)
    log.info("%s: trained %d epochs, validation rel-L2 %.4e", out.name, report.epochs_run, report.best_validation_score)
    return out.name, report.best_validation_score


def cmd_train(run: RunConfig, parallel: bool = False) -> dict[str, float]:
    load_dataset(run)  # fail early with an actionable message
    (run.out / "models").mkdir(parents=True, exist_ok=True)
    return dict(_map(_train_job, [(run, o) for o in run.outputs], parallel))


def _prune_job(job):
    run, out = job
    ds = load_dataset(run)
    graph, weights, _ = _load_stage_model(run, out.name, "unpruned")
    result = prune(
        graph,
        weights,
        ds.pair(out.name, "validation"),
        run.prune,
        finetune_data=ds.pair(out.name, "train"),
    )
    save_model(
        model_path(run, out.name, "pruned"),
        graph,
        result.weights,
        _meta(
            run,
            out.name,
            "pruned",
            initial_score=result.initial_score,
            final_score=result.final_score,
            surviving_count=result.surviving_count,
        ),
    )
    _write_csv(run.out / "prune" / f"{out.name}.attempts.csv", run, result.attempts_csv())
    log.info(
        "%s: pruned %d -> %d weights, score %.4e -> %.4e",
        out.name, graph.weight_count, result.surviving_count, result.initial_score, result.final_score,
    )
    return out.name, result.surviving_count


def cmd_prune(run: RunConfig, parallel: bool = False) -> dict[str, int]:
    load_dataset(run)
    for out in run.outputs:
        _load_stage_model(run, out.name, "unpruned")
    return dict(_map(_prune_job, [(run, o) for o in run.outputs], parallel))


def _final_model(run: RunConfig, output: str):
    if model_path(run, output, "pruned").exists():
        return "pruned", _load_stage_model(run, output, "pruned")
    return "unpruned", _load_stage_model(run, output, "unpruned")


def cmd_extract(run: RunConfig) -> dict[str, dict]:
    entries = {}
    lines = []
    for out in run.outputs:
        stage, (graph, weights, _) = _final_model(run, out.name)
        expr = simplify(extract(graph, weights))
        text = render(expr, 3)
        entries[out.name] = {
            "stage": stage,
            "expression": text,
            "prefix": to_prefix(expr),
            "surviving_params": weights.surviving_count,
            "unpruned_params": graph.weight_count,
            "expression_size": size(expr),
        }
        lines.append(f"{out.name} = {text}\n")
        lines.append(f"  prefix: {to_prefix(expr)}\n")
        lines.append(f"  parameters: {weights.surviving_count} of {graph.weight_count} ({stage})\n")
    paths = _paths(run)
    _json_dump(
        paths["expressions"],
        {"schema_version": SCHEMA_VERSION, "config_hash": run.hash, "system": run.system, "outputs": entries},
    )
    paths["expressions_txt"].write_text(
        f"# dpasr schema_version={SCHEMA_VERSION} config_hash={run.hash}\n" + "".join(lines)
    )
    return entries


def evaluate_output(run: RunConfig, out: OutputRun, ev: Dataset) -> list[EvalReport]:
    info = system_info(run.system)
    x, y = ev.pair(out.name)
    rows = []
    for stage in ("unpruned", "pruned"):
        if not model_path(run, out.name, stage).exists():
            continue
        graph, weights, _ = _load_stage_model(run, out.name, stage)
        pred = batch_forward(graph, weights, x)
        rows.append(
            EvalReport(
                system=run.system,
                output=out.name,
                variant=stage,
                relative_l2=relative_l2(pred, y),
                mae=mae(pred, y),
                surviving_params=weights.surviving_count,
                unpruned_params=graph.weight_count,
                headline_metric=info.headline_metric,
                expression_text=render(simplify(extract(graph, weights)), 3),
            )
        )
    return rows


def cmd_report(run: RunConfig) -> list[EvalReport]:
    ev = load_dataset(run, "evaluation")
    expressions = cmd_extract(run)
    reports: list[EvalReport] = []
    for out in run.outputs:
        reports.extend(evaluate_output(run, out, ev))
    paths = _paths(run)
    _write_csv(paths["results"], run, results_csv(reports))

    info = system_info(run.system)
    md = [
        f"# Results: {run.system}\n\n",
        f"schema_version {SCHEMA_VERSION}, config_hash {run.hash}, seed {run.seed}\n\n",
        f"Headline metric: {info.headline_metric} on {len(ev)} evaluation points.\n\n",
        "| output | variant | relative L2 | MAE | parameters | reduction |\n",
        "|---|---|---|---|---|---|\n",
    ]
    for r in reports:
        md.append(
            f"| {r.output} | DPA-{r.variant.capitalize()} | {r.relative_l2:.3e} | {r.mae:.3e} | "
            f"{r.surviving_params}/{r.unpruned_params} | {100 * r.reduction_fraction:.1f}% |\n"
        )
    md.append("\n## Expressions\n\n")
    for name, entry in expressions.items():
        md.append(f"- {name} ({entry['stage']}): `{entry['expression']}`\n")
    md.append("\n" + NOT_REPRODUCED)
    paths["report"].write_text("".join(md))
    return reports


def cmd_pipeline(run: RunConfig, parallel: bool = False) -> list[EvalReport]:
    cmd_dataset(run)
    cmd_train(run, parallel)
    cmd_prune(run, parallel)
    return cmd_report(run)
