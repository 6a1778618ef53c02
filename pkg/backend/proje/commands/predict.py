"""`proje predict`: top-N completions for one query given by names."""

import argparse
import logging

import numpy as np

from ..exceptions import VocabularyMismatchError
from ..models import Direction
from ..schemas import Task
from ..services.checkpoint_service import load_checkpoint
from ..services.graph_service import load_vocabulary
from ..services.projection_service import deployed_scores, query_logits
from .common import EXIT_OK, UsageError, add_graph_arguments, cli_command, load_graph_from_args, vocab_paths

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("predict", help="Rank completions of a single query")
    add_graph_arguments(parser, train_required=False)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--entities", help="Entity vocabulary dump (default: beside the checkpoint)")
    parser.add_argument("--relations", help="Relation vocabulary dump (default: beside the checkpoint)")
    parser.add_argument("--head")
    parser.add_argument("--relation")
    parser.add_argument("--tail")
    parser.add_argument("--top", type=int, default=10)
    parser.add_argument("--filter", action="store_true", help="Drop completions already known to be true")
    parser.set_defaults(handler=cmd_predict)


def _query_direction(args: argparse.Namespace, task: Task) -> Direction:
    given = (args.head is not None, args.relation is not None, args.tail is not None)
    if task is Task.RELATION:
        if given == (True, False, True):
            return Direction.RELATION_MISSING
        raise UsageError("a relation-prediction checkpoint needs --head and --tail only")
    if given == (True, True, False):
        return Direction.TAIL_MISSING
    if given == (False, True, True):
        return Direction.HEAD_MISSING
    raise UsageError("give --head and --relation, or --relation and --tail")


@cli_command
def cmd_predict(args: argparse.Namespace) -> int:
    if args.top < 0:
        raise UsageError(f"--top must be >= 0, got {args.top}")
    if args.filter and not args.train:
        raise UsageError("--filter needs the graph files (--train, optionally --valid/--test)")

    params, header = load_checkpoint(args.checkpoint)
    direction = _query_direction(args, header.task)
    graph = load_graph_from_args(args) if args.train else None
    vocab = graph.vocab if graph else load_vocabulary(*vocab_paths(args.checkpoint, args.entities, args.relations))
    if vocab.n_entities != params.n_entities:
        raise VocabularyMismatchError("entities", params.n_entities, vocab.n_entities)
    if vocab.n_relations != params.n_relations:
        raise VocabularyMismatchError("relations", params.n_relations, vocab.n_relations)

    if direction is Direction.RELATION_MISSING:
        first, second = vocab.entity_id(args.head), vocab.entity_id(args.tail)
        names = vocab.relation_names
    elif direction is Direction.TAIL_MISSING:
        first, second = vocab.entity_id(args.head), vocab.relation_id(args.relation)
        names = vocab.entity_names
    else:
        first, second = vocab.entity_id(args.tail), vocab.relation_id(args.relation)
        names = vocab.entity_names

    logits = query_logits(params, np.array([first]), np.array([second]), [direction])[0]
    scores = deployed_scores(logits, header.variant)

    candidates = np.arange(scores.size)
    if args.filter:
        index = graph.known_index
        if direction is Direction.RELATION_MISSING:
            known = index.relations(first, second)
        elif direction is Direction.TAIL_MISSING:
            known = index.tails(first, second)
        else:
            known = index.heads(second, first)
        candidates = np.setdiff1d(candidates, np.fromiter(known, dtype=np.int64, count=len(known)))

    # Highest logit first, lower ID first among ties; saturated scores would tie
    ranked = candidates[np.lexsort((candidates, -logits[candidates]))][:args.top]
    for rank, idx in enumerate(ranked, start=1):
        print(f"{rank}\t{names[idx]}\t{scores[idx]:.6g}")
    return EXIT_OK
