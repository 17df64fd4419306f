#!/usr/bin/env python
"""
Command-line interface for the Low Vision GUI Checker.

Subcommands check layouts against a trained model, train and evaluate
models on labeled corpora, generate synthetic corpora, and dump the
intermediate tree, graph and feature representations of a layout.

Machine output (JSON, CSV, XML, SVG) goes to stdout or --out; logs go to
stderr.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import checker
import experiments
from config import config
from feature_encoder import features_csv
from findings_store import FindingStore
from gcn_model import (
    GcnConfig,
    load_checkpoint,
    model_info,
    save_checkpoint,
    write_history_csv,
)
from graph_builder import build_gui_graph, graph_to_json, to_tensors
from layout_parser import filter_visible, read_layout, serialize_layout
from synth_corpus import CorpusSpec, generate, load_corpus, write_corpus
from utils.errors import CheckerError
from utils.logging_config import configure_application_logging, setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)


def _emit(text: str, out: Optional[str]) -> None:
    """Write machine output to --out, or stdout."""
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _emit_json(payload: object, out: Optional[str]) -> None:
    _emit(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False), out)


def cmd_check(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.model)
    run = checker.check(args.layouts, model)

    if args.format == "text":
        _emit(checker.report_text(run), args.out)
    else:
        _emit(checker.report_json(run), args.out)

    if args.svg_dir:
        svg_dir = Path(args.svg_dir)
        svg_dir.mkdir(parents=True, exist_ok=True)
        for index, result in enumerate(run.results):
            if result.ok:
                name = f"{index:04d}_{Path(result.path).stem}.svg"
                (svg_dir / name).write_bytes(checker.overlay(result.tree, result.report))
        logger.info(f"Wrote overlays to {svg_dir}")

    if args.record:
        FindingStore(config.DATABASE_URL).record_run(run)

    return run.exit_code


def cmd_train(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    overrides = {} if args.epochs is None else {"epochs": args.epochs}
    gcn_config = GcnConfig.from_config(**overrides)

    model, history, val_set = checker.train_on_corpus(
        corpus, gcn_config, ratios=(1.0 - args.val_ratio, args.val_ratio, 0.0), mask=args.mask
    )
    save_checkpoint(model, args.out)
    history_path = args.history or str(Path(args.out).with_suffix(".csv"))
    write_history_csv(history, history_path)
    logger.info(f"Wrote training log to {history_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.model)
    dataset = checker.build_dataset(load_corpus(args.corpus), model.config.n_nodes)
    predicted, gold = checker.labeled_predictions(model, dataset)

    payload: Dict[str, object] = checker.evaluate(predicted, gold).to_dict()
    payload["accuracy"] = round(float((predicted == gold).mean()), 3) if gold.size else "n/a"
    if args.per_class:
        payload["confusion"] = checker.per_class_confusion(predicted, gold)
    _emit_json(payload, args.out)
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    spec = CorpusSpec(
        n_guis=args.n_guis,
        components_per_gui=(args.min_components, args.max_components),
        groups_per_gui=(args.min_groups, args.max_groups),
        issue_rates=tuple(args.issue_rates),
        seed=config.SEED,
        device=config.device,
        nav_correlation=args.nav_correlation,
    )
    write_corpus(generate(spec), args.out, spec)
    return 0


def cmd_model_info(args: argparse.Namespace) -> int:
    _emit_json(model_info(load_checkpoint(args.model)), args.out)
    return 0


def cmd_dump_tree(args: argparse.Namespace) -> int:
    tree = filter_visible(read_layout(args.layout))
    _emit(serialize_layout(tree).decode("utf-8"), args.out)
    return 0


def cmd_dump_graph(args: argparse.Namespace) -> int:
    graph = build_gui_graph(filter_visible(read_layout(args.layout)))
    _emit(graph_to_json(graph), args.out)
    return 0


def cmd_dump_features(args: argparse.Namespace) -> int:
    labels = None
    if args.labels:
        labels = {k: int(v) for k, v in json.loads(Path(args.labels).read_text()).items()}
    graph = build_gui_graph(filter_visible(read_layout(args.layout)), labels)
    tensors = to_tensors(graph, mask=args.mask)
    _emit(features_csv(tensors.features, tensors.labels, graph.n_real), args.out)
    return 0


def cmd_findings(args: argparse.Namespace) -> int:
    store = FindingStore(config.DATABASE_URL)
    if args.layout:
        payload: object = store.get_findings_for_layout(args.layout)
    else:
        payload = {
            "issue_frequency": store.get_issue_frequency(),
            "layouts": store.get_layouts_with_issues(limit=args.limit),
        }
    _emit_json(payload, args.out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    results: Dict[str, object] = {}
    if args.experiment in ("depth", "all"):
        sweep = experiments.conv_depth_sweep(corpus, depths=args.depths, seeds=args.seeds)
        results["conv_depth"] = {str(k): v for k, v in sweep.items()}
    if args.experiment in ("attributes", "all"):
        results["attributes"] = experiments.attribute_ablation(corpus, seed=config.SEED)
    if args.experiment in ("fc", "all"):
        results["fc"] = experiments.fc_ablation(corpus, seed=config.SEED)
    if args.experiment in ("correlation", "all"):
        model, _, val_set = checker.train_on_corpus(corpus, GcnConfig.from_config())
        correlation = experiments.neighbor_correlation(model, val_set)
        # NaN is not valid JSON
        results["correlation"] = {k: (None if math.isnan(v) else v) for k, v in correlation.items()}
    _emit_json(results, args.out)
    return 0


# Commands that write files rather than printing
NEEDS_OUT = ("train", "gen-corpus")

COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "check": cmd_check,
    "train": cmd_train,
    "eval": cmd_eval,
    "gen-corpus": cmd_gen_corpus,
    "model-info": cmd_model_info,
    "dump-tree": cmd_dump_tree,
    "dump-graph": cmd_dump_graph,
    "dump-features": cmd_dump_features,
    "findings": cmd_findings,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file with configuration overrides")
    common.add_argument("--seed", type=int, help="Random seed (overrides config SEED)")
    common.add_argument("--out", help="Write output here instead of stdout")
    common.add_argument("--log-file", help="Also write logs to this file")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level")

    parser = argparse.ArgumentParser(
        description="Detect low vision accessibility issues in GUI layouts"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="Check layout files")
    p.add_argument("layouts", nargs="+", help="Layout files or directories")
    p.add_argument("--model", required=True, help="Model checkpoint")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--svg-dir", help="Write one SVG overlay per checked file here")
    p.add_argument("--record", action="store_true", help="Record findings in the database")

    p = sub.add_parser("train", parents=[common], help="Train a model on a corpus")
    p.add_argument("corpus", help="Corpus directory")
    p.add_argument("--epochs", type=int, help="Override config EPOCHS")
    p.add_argument("--val-ratio", type=float, default=0.2, help="Validation share (default: 0.2)")
    p.add_argument("--mask", choices=["none", "accessibility", "inherent"], default="none")
    p.add_argument("--history", help="Training log CSV (default: next to --out)")

    p = sub.add_parser("eval", parents=[common], help="Evaluate a model on a corpus")
    p.add_argument("corpus", help="Corpus directory")
    p.add_argument("--model", required=True, help="Model checkpoint")
    p.add_argument("--per-class", action="store_true", help="Add the 5x5 confusion matrix")

    p = sub.add_parser("gen-corpus", parents=[common], help="Generate a synthetic corpus")
    p.add_argument("--n-guis", type=int, default=100)
    p.add_argument("--min-components", type=int, default=3)
    p.add_argument("--max-components", type=int, default=30)
    p.add_argument("--min-groups", type=int, default=1)
    p.add_argument("--max-groups", type=int, default=5)
    p.add_argument(
        "--issue-rates",
        type=float,
        nargs=4,
        default=[0.15, 0.15, 0.15, 0.1],
        metavar=("SMALL", "NARROW", "CONTRAST", "ALERT"),
    )
    p.add_argument(
        "--nav-correlation",
        type=float,
        help="Add a navigation bar whose items share issues with this probability",
    )

    p = sub.add_parser("model-info", parents=[common], help="Show checkpoint shapes and config")
    p.add_argument("--model", required=True, help="Model checkpoint")

    for name, help_text in (
        ("dump-tree", "Print the filtered layout tree as XML"),
        ("dump-graph", "Print the GUI-graph as JSON"),
        ("dump-features", "Print the feature matrix as CSV"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("layout", help="Layout file")
        if name == "dump-features":
            p.add_argument("--labels", help="JSON map of resource_id to class index")
            p.add_argument("--mask", choices=["none", "accessibility", "inherent"], default="none")

    p = sub.add_parser("findings", parents=[common], help="Query recorded findings")
    p.add_argument("--layout", help="Show findings of this layout path")
    p.add_argument("--limit", type=int, default=20, help="Maximum layouts to list")

    p = sub.add_parser("ablate", parents=[common], help="Run model ablations on a corpus")
    p.add_argument("corpus", help="Corpus directory")
    p.add_argument("--experiment", choices=["depth", "attributes", "fc", "correlation", "all"], default="all")
    p.add_argument("--depths", type=int, nargs="+", default=[2, 6])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse command line arguments and run one command."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in NEEDS_OUT and not args.out:
        parser.error(f"{args.command} requires --out")

    try:
        if args.config:
            config.load_file(args.config)
        if args.seed is not None:
            config.SEED = args.seed
        configure_application_logging(
            logging.DEBUG if args.verbose else config.LOG_LEVEL, args.log_file
        )
        return COMMANDS[args.command](args)
    except (CheckerError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return checker.EXIT_FAILED
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        return checker.EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
