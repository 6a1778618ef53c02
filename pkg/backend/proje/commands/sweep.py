"""`proje sweep`: one training run per negative sampling rate."""

import argparse
import concurrent.futures
import logging
from typing import List, Optional, Sequence

from ..schemas import ModelConfig, SweepRow
from ..services.evaluation_service import evaluate
from ..services.graph_service import KnowledgeGraph
from ..services.training_service import train
from ..task_data import DEFAULT_EPOCHS, DEFAULT_SEED, SWEEP_RATES
from ..utils.report_writer import write_rows
from ..utils.rng import RngStream
from .common import (
    EXIT_OK,
    UsageError,
    add_config_arguments,
    add_graph_arguments,
    build_config,
    cli_command,
    echo_config,
    load_graph_from_args,
)

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="Train and evaluate across sampling rates")
    add_graph_arguments(parser)
    add_config_arguments(parser)
    parser.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--rates", type=float, nargs="+", default=list(SWEEP_RATES))
    parser.add_argument("--hits-k", type=int)
    parser.add_argument("--out", required=True, help="Sweep CSV path")
    parser.add_argument("--parallel", action="store_true", help="Run the trainings in separate processes")
    parser.set_defaults(handler=cmd_sweep)


def _run_rate(
    graph: KnowledgeGraph,
    config: ModelConfig,
    epochs: int,
    seed: int,
    split: str,
    hits_k: Optional[int],
) -> SweepRow:
    params, _ = train(graph, config, epochs, RngStream.from_seed(seed))
    report = evaluate(graph, params, config, split=split, hits_k=hits_k)
    logger.info("p_y=%.2f: filtered HITS@%d=%.4f", config.sampling_p, report.k_of_hits, report.hits_at_k_filtered)
    return SweepRow(sampling_p=config.sampling_p, report=report)


def run_sweep(
    graph: KnowledgeGraph,
    config: ModelConfig,
    epochs: int,
    seed: int,
    split: str,
    rates: Sequence[float] = SWEEP_RATES,
    hits_k: Optional[int] = None,
    parallel: bool = False,
) -> List[SweepRow]:
    """Same seed and configuration for every rate; only p_y changes."""
    configs = [ModelConfig(**{**config.model_dump(), "sampling_p": rate}) for rate in rates]
    if not parallel:
        return [_run_rate(graph, c, epochs, seed, split, hits_k) for c in configs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=len(configs)) as pool:
        futures = [pool.submit(_run_rate, graph, c, epochs, seed, split, hits_k) for c in configs]
        return [f.result() for f in futures]


@cli_command
def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args)
    if args.epochs < 0:
        raise UsageError(f"--epochs must be >= 0, got {args.epochs}")
    if args.hits_k is not None and args.hits_k < 1:
        raise UsageError(f"--hits-k must be >= 1, got {args.hits_k}")
    echo_config(config, epochs=args.epochs, seed=args.seed, rates=args.rates)
    graph = load_graph_from_args(args)
    split = "test" if graph.test else "valid" if graph.valid else None
    if split is None:
        raise UsageError("sweep needs --test or --valid to evaluate on")

    rows = run_sweep(graph, config, args.epochs, args.seed, split, args.rates, args.hits_k, args.parallel)
    write_rows(args.out, rows, SweepRow.CSV_COLUMNS)
    return EXIT_OK
