"""Raw and filtered mean rank / HITS@k for entity and relation prediction."""

import concurrent.futures
import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence

import numpy as np

from .. import config as settings
from ..exceptions import ContractViolation, VocabularyMismatchError
from ..models import Direction, ModelParams
from ..schemas import EvalReport, ModelConfig, Task
from ..task_data import get_hits_k_for_task
from .graph_service import FilterIndex, KnowledgeGraph, Triple
from .projection_service import query_logits

logger = logging.getLogger(__name__)


def rank_of_target(scores: np.ndarray, target_index: int, filter_mask: Optional[np.ndarray] = None) -> int:
    """1 + competitors scoring higher + equal-scoring competitors with a lower index.

    Competitors flagged in `filter_mask` are ignored.
    """
    scores = np.asarray(scores)
    if filter_mask is not None and filter_mask[target_index]:
        raise ContractViolation(f"target {target_index} is excluded by the filter mask")
    target_score = scores[target_index]
    ahead = scores > target_score
    tied_before = scores[:target_index] == target_score
    ahead[:target_index] |= tied_before
    if filter_mask is not None:
        ahead &= ~filter_mask
    return 1 + int(ahead.sum())


@dataclass(frozen=True)
class Query:
    first: int
    second: int
    direction: Direction
    target: int
    known: FrozenSet[int]


def build_queries(triples: Sequence[Triple], task: Task, index: FilterIndex) -> List[Query]:
    """Tail and head replacement per triple for entities; one query per triple for relations."""
    queries: List[Query] = []
    for h, r, t in triples:
        if task is Task.RELATION:
            queries.append(Query(h, t, Direction.RELATION_MISSING, r, index.relations(h, t)))
        else:
            queries.append(Query(h, r, Direction.TAIL_MISSING, t, index.tails(h, r)))
            queries.append(Query(t, r, Direction.HEAD_MISSING, h, index.heads(r, t)))
    return queries


def _rank_chunk(params: ModelParams, queries: Sequence[Query]) -> tuple[np.ndarray, np.ndarray]:
    logits = query_logits(
        params,
        np.array([q.first for q in queries], dtype=np.int64),
        np.array([q.second for q in queries], dtype=np.int64),
        [q.direction for q in queries],
    )
    # sigmoid and softmax are monotone per row; logits keep saturated scores apart
    raw = np.empty(len(queries), dtype=np.int64)
    filtered = np.empty(len(queries), dtype=np.int64)
    for i, query in enumerate(queries):
        raw[i] = rank_of_target(logits[i], query.target)
        mask = np.zeros(logits.shape[1], dtype=bool)
        competitors = np.fromiter((c for c in query.known if c != query.target), dtype=np.int64)
        mask[competitors] = True
        filtered[i] = rank_of_target(logits[i], query.target, mask)
    return raw, filtered


def query_ranks(
    params: ModelParams,
    queries: Sequence[Query],
    workers: int = 1,
    chunk_size: int = settings.EVAL_CHUNK_SIZE,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw and filtered rank of every query, in query order."""
    chunks = [queries[i:i + chunk_size] for i in range(0, len(queries), chunk_size)]
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda chunk: _rank_chunk(params, chunk), chunks))
    else:
        results = [_rank_chunk(params, chunk) for chunk in chunks]
    if not results:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def summarize(
    raw: np.ndarray,
    filtered: np.ndarray,
    task: Task,
    split: str,
    hits_k: int,
) -> EvalReport:
    return EvalReport(
        task=task,
        split=split,
        mean_rank_raw=float(raw.mean()),
        mean_rank_filtered=float(filtered.mean()),
        hits_at_k_raw=float((raw <= hits_k).mean()),
        hits_at_k_filtered=float((filtered <= hits_k).mean()),
        k_of_hits=hits_k,
        n_queries=int(raw.size),
    )


def evaluate(
    graph: KnowledgeGraph,
    params: ModelParams,
    config: ModelConfig,
    task: Optional[Task] = None,
    split: str = "test",
    hits_k: Optional[int] = None,
    workers: Optional[int] = None,
    limit: Optional[int] = None,
) -> EvalReport:
    """Rank every held-out triple of `split` against all candidates.

    Filtered ranks ignore competitors that form a true triple anywhere in
    train ∪ valid ∪ test. Candidates are ordered by logit with dropout
    disabled, the same order the deployed sigmoid or softmax gives.
    """
    task = Task(task or config.task)
    if params.n_entities != graph.n_entities:
        raise VocabularyMismatchError("entities", params.n_entities, graph.n_entities)
    if params.n_relations != graph.n_relations:
        raise VocabularyMismatchError("relations", params.n_relations, graph.n_relations)
    triples = graph.split(split)
    if limit is not None:
        triples = triples[:limit]
    if not triples:
        raise ContractViolation(f"cannot evaluate on an empty {split} split")

    queries = build_queries(triples, task, graph.known_index)
    raw, filtered = query_ranks(params, queries, workers or settings.EVAL_WORKERS)
    report = summarize(raw, filtered, task, split, get_hits_k_for_task(task, hits_k))
    logger.info(
        "Evaluated %d %s queries on %s: MR %.2f/%.2f HITS@%d %.4f/%.4f (raw/filtered)",
        report.n_queries, task.value, split, report.mean_rank_raw, report.mean_rank_filtered,
        report.k_of_hits, report.hits_at_k_raw, report.hits_at_k_filtered,
    )
    return report


def format_report(report: EvalReport) -> str:
    """Raw/Filtered × Mean Rank/HITS@k table."""
    title = f"{report.task.value.capitalize()} prediction on {report.split} ({report.n_queries} queries)"
    hits = f"HITS@{report.k_of_hits}"
    lines = [
        title,
        f"{'Mean Rank':^22}  {hits:^22}",
        f"{'Raw':>10}  {'Filtered':>10}  {'Raw':>10}  {'Filtered':>10}",
        f"{report.mean_rank_raw:>10.2f}  {report.mean_rank_filtered:>10.2f}  "
        f"{report.hits_at_k_raw:>10.1%}  {report.hits_at_k_filtered:>10.1%}",
    ]
    return "\n".join(lines)
