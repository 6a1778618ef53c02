"""`proje train`: fit a model and write its checkpoint."""

import argparse
import contextlib
import logging

from ..exceptions import ConfigurationError, VocabularyMismatchError
from ..schemas import EpochMetrics
from ..services.checkpoint_service import load_checkpoint, save_checkpoint
from ..services.evaluation_service import evaluate, format_report
from ..services.graph_service import dump_vocabulary
from ..services.training_service import train
from ..task_data import DEFAULT_EPOCHS, DEFAULT_SEED
from ..utils.report_writer import CsvReportWriter
from ..utils.rng import RngStream
from .common import (
    EXIT_OK,
    add_config_arguments,
    add_graph_arguments,
    build_config,
    cli_command,
    echo_config,
    load_graph_from_args,
    vocab_paths,
)

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train a model")
    add_graph_arguments(parser)
    add_config_arguments(parser)
    parser.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", required=True, help="Checkpoint path to write")
    parser.add_argument("--curve", help="Per-epoch CSV (loss, and validation metrics when --valid is given)")
    parser.add_argument("--init", help="Checkpoint to initialize parameters from")
    parser.set_defaults(handler=cmd_train)


@cli_command
def cmd_train(args: argparse.Namespace) -> int:
    config = build_config(args)
    if args.epochs < 0:
        raise ConfigurationError(f"--epochs must be >= 0, got {args.epochs}")
    echo_config(config, epochs=args.epochs, seed=args.seed)

    graph = load_graph_from_args(args)
    initial = None
    if args.init:
        initial, header = load_checkpoint(args.init)
        if header.n_entities != graph.n_entities:
            raise VocabularyMismatchError("entities", header.n_entities, graph.n_entities)
        if header.n_relations != graph.n_relations:
            raise VocabularyMismatchError("relations", header.n_relations, graph.n_relations)
        if header.k != config.k:
            raise ConfigurationError(f"--init checkpoint has k={header.k}, but k={config.k} was requested")

    rng = RngStream.from_seed(args.seed)
    validation = "valid" if args.curve and graph.valid else None
    sink_context = CsvReportWriter(args.curve, EpochMetrics.CSV_COLUMNS) if args.curve else contextlib.nullcontext()
    with sink_context as sink:
        params, _ = train(
            graph,
            config,
            args.epochs,
            rng,
            report_sink=sink,
            validation_split=validation,
            initial_params=initial,
        )

    save_checkpoint(params, config, args.out)
    dump_vocabulary(graph.vocab, *vocab_paths(args.out))

    if graph.test:
        print(format_report(evaluate(graph, params, config, split="test")))
    return EXIT_OK
