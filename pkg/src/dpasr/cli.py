"""Command-line entry point: ``dpasr <stage> --config run.json``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .aph import AphConvergenceError
from .autodiff import NonFiniteLoss
from .config import ConfigError, load_run_config
from .metrics import MetricError
from .optimizer import TrainingDiverged
from .program_graph import ArchitectureTooLarge
from .serialization import ModelFormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

STAGES = ("dataset", "train", "prune", "extract", "report", "pipeline")

log = logging.getLogger("dpasr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpasr",
        description="Symbolic regression with pruned differentiable program architectures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument(
            "--parallel-outputs",
            action="store_true",
            help="train/prune the per-output architectures in separate processes",
        )
    return parser


def _setup_logging() -> None:
    level = os.environ.get("DPASR_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, seed=args.seed, out=args.out)
    cfg.out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd == "dataset":
        ds = pipeline.cmd_dataset(cfg)
        print(f"wrote {len(ds)} rows to {cfg.out / 'dataset.csv'}")
    elif cmd == "train":
        for name, score in pipeline.cmd_train(cfg, args.parallel_outputs).items():
            print(f"{name}: validation relative L2 {score:.4e}")
    elif cmd == "prune":
        for name, count in pipeline.cmd_prune(cfg, args.parallel_outputs).items():
            print(f"{name}: {count} surviving weights")
    elif cmd == "extract":
        for name, entry in pipeline.cmd_extract(cfg).items():
            print(f"{name} = {entry['expression']}")
    else:
        if cmd == "pipeline":
            reports = pipeline.cmd_pipeline(cfg, args.parallel_outputs)
        else:
            reports = pipeline.cmd_report(cfg)
        for r in reports:
            print(f"{r.output} [{r.variant}] {r.headline_metric}={r.headline:.4e} params={r.surviving_params}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ConfigError, ArchitectureTooLarge) as exc:
        print(f"dpasr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteLoss, TrainingDiverged, AphConvergenceError, MetricError) as exc:
        print(f"dpasr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ModelFormatError) as exc:
        print(f"dpasr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
