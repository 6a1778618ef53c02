"""`proje eval`: score a checkpoint on a split."""

import argparse
import logging

from ..schemas import EvalReport, ModelConfig
from ..services.checkpoint_service import load_checkpoint
from ..services.evaluation_service import evaluate, format_report
from ..services.graph_service import SPLITS
from ..utils.report_writer import write_rows
from .common import EXIT_OK, UsageError, add_graph_arguments, cli_command, load_graph_from_args

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate a checkpoint")
    add_graph_arguments(parser)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--split", choices=SPLITS, default="test")
    parser.add_argument("--hits-k", type=int, help="HITS cut-off (default 10 for entities, 1 for relations)")
    parser.add_argument("--out", help="CSV file for the report")
    parser.add_argument("--workers", type=int, help="Evaluation threads")
    parser.set_defaults(handler=cmd_eval)


@cli_command
def cmd_eval(args: argparse.Namespace) -> int:
    if args.hits_k is not None and args.hits_k < 1:
        raise UsageError(f"--hits-k must be >= 1, got {args.hits_k}")
    params, header = load_checkpoint(args.checkpoint)
    graph = load_graph_from_args(args)
    config = ModelConfig(task=header.task, variant=header.variant, k=header.k)

    report = evaluate(graph, params, config, split=args.split, hits_k=args.hits_k, workers=args.workers)
    print(format_report(report))
    if args.out:
        write_rows(args.out, [report], EvalReport.CSV_COLUMNS)
    return EXIT_OK
