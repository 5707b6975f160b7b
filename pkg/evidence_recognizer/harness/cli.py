"""Command line entry point: train, eval, show-model and benchmark."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

from evidence_recognizer.cmp import traffic_logger
from evidence_recognizer.exceptions import RecognizerException
from evidence_recognizer.harness.benchmarks import SUITES, run_suite
from evidence_recognizer.harness.config import Mode, load_config
from evidence_recognizer.harness.experiment import build_state, run_experiment
from evidence_recognizer.harness.metrics import compute_metrics, label_mapping
from evidence_recognizer.harness.persistence import (
    load_memories,
    load_state,
    save_state,
    write_results_csv,
    write_traces_jsonl,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    from evidence_recognizer.harness.experiment import EpisodeResult, ExperimentState

logger = logging.getLogger(__name__)


def _write_outputs(results: list[EpisodeResult], metrics: dict, out: Path | None) -> None:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(results, out / "results.csv")
        write_traces_jsonl(results, out / "traces.jsonl")
        (out / "metrics.json").write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    print(json.dumps(metrics, sort_keys=True, indent=2))


def _metrics(state: ExperimentState, results: list[EpisodeResult]) -> dict:
    primary = state.lms[state.config.lms[0].lm_id]
    return compute_metrics(results, label_mapping(primary.memory))


def train(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    config = replace(config, mode=Mode.TRAIN, seed=config.seed if args.seed is None else args.seed)
    state = build_state(config)
    results = run_experiment(state)
    save_state(state, args.out)
    _write_outputs(results, _metrics(state, results), Path(args.out))


def evaluate(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    config = replace(config, mode=Mode.EVAL, seed=config.seed if args.seed is None else args.seed)
    state = load_state(args.models, config)
    results = run_experiment(state)
    _write_outputs(results, _metrics(state, results), None if args.out is None else Path(args.out))


def show_model(args: argparse.Namespace) -> None:
    memories = load_memories(args.models)
    if not memories:
        raise RecognizerException(f"No model files in {args.models}")
    lm_id = args.lm or sorted(memories)[0]
    model = memories[lm_id].get(args.object)
    writer = csv.writer(sys.stdout)
    writer.writerow(["node", "x", "y", "z", "normal", "curvature_dir_1", "curvature_dir_2", "features"])
    for index, node in enumerate(model.nodes):
        writer.writerow(
            [
                index,
                *node.location,
                " ".join(repr(v) for v in node.frame.point_normal),
                " ".join(repr(v) for v in node.frame.curvature_dir_1),
                " ".join(repr(v) for v in node.frame.curvature_dir_2),
                json.dumps(node.features, sort_keys=True),
            ]
        )


def benchmark(args: argparse.Namespace) -> None:
    report = run_suite(args.suite, args.seed or 0)
    _write_outputs(report.results, report.metrics, None if args.out is None else Path(args.out))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evidence-recognizer", description=__doc__)
    parser.add_argument("--log-level", default="WARNING", help="Logging level. Defaults to WARNING.")
    parser.add_argument("--log-cmp", default=None, help="Write every exchanged message as a JSON line here.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    train_parser = subparsers.add_parser("train", help="Learn models from an experiment config.")
    train_parser.add_argument("--config", required=True)
    train_parser.add_argument("--seed", type=int, default=None)
    train_parser.add_argument("--out", required=True, help="Directory receiving models and results.")
    train_parser.set_defaults(func=train)

    eval_parser = subparsers.add_parser("eval", help="Evaluate saved models without changing them.")
    eval_parser.add_argument("--config", required=True)
    eval_parser.add_argument("--models", required=True, help="Directory written by `train`.")
    eval_parser.add_argument("--seed", type=int, default=None)
    eval_parser.add_argument("--out", default=None)
    eval_parser.set_defaults(func=evaluate)

    show_parser = subparsers.add_parser("show-model", help="Print the node table of a learned model.")
    show_parser.add_argument("--models", required=True)
    show_parser.add_argument("--object", required=True)
    show_parser.add_argument("--lm", default=None)
    show_parser.set_defaults(func=show_model)

    benchmark_parser = subparsers.add_parser("benchmark", help="Run a closed-loop benchmark suite.")
    benchmark_parser.add_argument("--suite", required=True, choices=sorted(SUITES))
    benchmark_parser.add_argument("--seed", type=int, default=None)
    benchmark_parser.add_argument("--out", default=None)
    benchmark_parser.set_defaults(func=benchmark)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    if args.log_cmp:
        handler = logging.FileHandler(args.log_cmp, mode="w")
        handler.setFormatter(logging.Formatter("%(message)s"))
        traffic_logger.addHandler(handler)
        traffic_logger.setLevel(logging.INFO)
    try:
        args.func(args)
    except (RecognizerException, OSError):
        logger.error(f"{args.command} failed", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
