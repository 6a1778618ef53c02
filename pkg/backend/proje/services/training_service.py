"""Training loop: instance construction, candidate sampling, dropout, gradients, L1 and Adam."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .. import config as settings
from ..exceptions import ConfigurationError, ContractViolation, TrainingDivergedError, VocabularyMismatchError
from ..models import Direction, Gradients, ModelParams, SparseRows, TrainingInstance, TENSOR_ORDER
from ..schemas import EpochMetrics, ModelConfig, Task, Variant
from ..utils.rng import RngStream
from .evaluation_service import evaluate
from .graph_service import KnowledgeGraph, Triple
from .optimizer_service import AdamState, adam_step
from .projection_service import LOG_EPS, hidden_states, sigmoid, softmax

logger = logging.getLogger(__name__)

ReportSink = Callable[[EpochMetrics], None]


# ---------------------------------------------------------------------------
# Initialization, sampling and dropout
# ---------------------------------------------------------------------------

def init_params(n_entities: int, n_relations: int, k: int, rng: np.random.Generator) -> ModelParams:
    """Draw every learnable scalar i.i.d. from U[-6/sqrt(k), 6/sqrt(k)]."""
    if k < 1:
        raise ConfigurationError(f"embedding size k must be >= 1, got {k}")
    bound = 6.0 / math.sqrt(k)
    shapes = {
        "W_E": (n_entities, k),
        "W_R": (n_relations, k),
        "D_eh": (k,),
        "D_rh": (k,),
        "D_et": (k,),
        "D_rt": (k,),
        "b_c": (k,),
        "b_p": (1,),
    }
    return ModelParams(**{name: rng.uniform(-bound, bound, size=shapes[name]) for name in TENSOR_ORDER})


def build_instances(
    train: Sequence[Triple],
    graph: KnowledgeGraph,
    p_y: float,
    task: Task,
    rng: RngStream,
) -> List[TrainingInstance]:
    """One instance per training triple.

    Entity task: the head or the tail is dropped with equal probability;
    the positives are every train-split completion of the remaining pair.
    Relation task: the positives are every train-split relation between
    head and tail. Each remaining candidate joins as a negative
    independently with probability p_y.
    """
    if not 0.0 <= p_y <= 1.0:
        raise ConfigurationError(f"sampling probability must lie in [0, 1], got {p_y}")
    task = Task(task)
    index = graph.train_index
    n_candidates = graph.n_entities if task is Task.ENTITY else graph.n_relations

    instances: List[TrainingInstance] = []
    for h, r, t in train:
        relation: Optional[int] = r
        other: Optional[int] = None
        if task is Task.RELATION:
            direction, known, positives = Direction.RELATION_MISSING, h, index.relations(h, t)
            relation, other = None, t
        elif rng.corruption.integers(2) == 0:
            direction, known, positives = Direction.TAIL_MISSING, h, index.tails(h, r)
        else:
            direction, known, positives = Direction.HEAD_MISSING, t, index.heads(r, t)

        positive_ids = np.fromiter(sorted(positives), dtype=np.int64, count=len(positives))
        include = rng.sampling.random(n_candidates) < p_y
        include[positive_ids] = False
        negative_ids = np.flatnonzero(include)

        instances.append(
            TrainingInstance(
                known_entity=known,
                relation=relation,
                direction=direction,
                candidates=np.concatenate([positive_ids, negative_ids]),
                labels=np.concatenate([np.ones(positive_ids.size), np.zeros(negative_ids.size)]),
                other_entity=other,
            )
        )
    return instances


def dropout_mask(k: int, p_d: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability p_d, else 1/(1-p_d)."""
    if not 0.0 <= p_d < 1.0:
        raise ConfigurationError(f"dropout probability must lie in [0, 1), got {p_d}")
    if p_d == 0.0:
        return np.ones(k)
    keep = rng.random(k) >= p_d
    return keep / (1.0 - p_d)


# ---------------------------------------------------------------------------
# Analytic gradients
# ---------------------------------------------------------------------------

@dataclass
class PackedInstances:
    """Instances padded to a common candidate count."""

    first_ids: np.ndarray
    second_ids: np.ndarray
    directions: List[Direction]
    candidates: np.ndarray
    labels: np.ndarray
    valid: np.ndarray
    masks: np.ndarray


def pack_instances(instances: Sequence[TrainingInstance], masks: np.ndarray) -> PackedInstances:
    width = max(inst.candidates.size for inst in instances)
    n = len(instances)
    candidates = np.zeros((n, width), dtype=np.int64)
    labels = np.zeros((n, width))
    valid = np.zeros((n, width), dtype=bool)
    for i, inst in enumerate(instances):
        size = inst.candidates.size
        candidates[i, :size] = inst.candidates
        labels[i, :size] = inst.labels
        valid[i, :size] = True
    relation_task = instances[0].direction is Direction.RELATION_MISSING
    return PackedInstances(
        first_ids=np.array([inst.known_entity for inst in instances], dtype=np.int64),
        second_ids=np.array(
            [inst.other_entity if relation_task else inst.relation for inst in instances],
            dtype=np.int64,
        ),
        directions=[inst.direction for inst in instances],
        candidates=candidates,
        labels=labels,
        valid=valid,
        masks=masks,
    )


def backward_packed(packed: PackedInstances, params: ModelParams, variant: Variant) -> tuple[float, Gradients]:
    """Summed loss and its exact gradient for a padded group of instances."""
    variant = Variant(variant)
    relation_task = packed.directions[0] is Direction.RELATION_MISSING
    states = hidden_states(params, packed.first_ids, packed.second_ids, packed.directions, packed.masks)
    hidden = states.hidden
    table = params.W_R if relation_task else params.W_E

    w_c = table[packed.candidates]
    logits = np.einsum("bsk,bk->bs", w_c, hidden) + params.b_p[0]
    y, valid = packed.labels, packed.valid

    if variant is Variant.POINTWISE:
        p = sigmoid(logits)
        log_p = np.log(np.clip(p, LOG_EPS, 1.0 - LOG_EPS))
        log_q = np.log(np.clip(1.0 - p, LOG_EPS, 1.0 - LOG_EPS))
        loss = -float(np.where(valid, y * log_p + (1.0 - y) * log_q, 0.0).sum())
        d_logits = (p - y) * valid
    else:
        p = softmax(np.where(valid, logits, -np.inf), axis=1)
        log_p = np.log(np.clip(p, LOG_EPS, 1.0 - LOG_EPS))
        n_pos = y.sum(axis=1, keepdims=True)
        if variant is Variant.LISTWISE:
            target = y / n_pos
            d_logits = p - target
        else:
            target = y
            d_logits = n_pos * p - y
        loss = -float((target * log_p).sum())
        d_logits = d_logits * valid

    grad_rows = d_logits[:, :, None] * hidden[:, None, :]
    candidate_rows = SparseRows(packed.candidates[valid], grad_rows[valid])

    d_hidden = np.einsum("bs,bsk->bk", d_logits, w_c)
    d_combined = d_hidden * (1.0 - hidden * hidden) * packed.masks
    d_d_first = d_combined * states.first
    d_d_second = d_combined * states.second
    first_rows = SparseRows(packed.first_ids, d_combined * states.d_first)
    second_rows = SparseRows(packed.second_ids, d_combined * states.d_second)

    k = params.k
    grads = Gradients.zeros(k)
    grads.dense["b_c"] = d_combined.sum(axis=0)
    grads.dense["b_p"] = np.array([d_logits.sum()])
    if relation_task:
        grads.dense["D_eh"] = d_d_first.sum(axis=0)
        grads.dense["D_et"] = d_d_second.sum(axis=0)
        grads.W_E = SparseRows.concat([first_rows, second_rows], k)
        grads.W_R = candidate_rows
    else:
        tail_missing = np.array([d is Direction.TAIL_MISSING for d in packed.directions])
        grads.dense["D_eh"] = d_d_first[tail_missing].sum(axis=0)
        grads.dense["D_rh"] = d_d_second[tail_missing].sum(axis=0)
        grads.dense["D_et"] = d_d_first[~tail_missing].sum(axis=0)
        grads.dense["D_rt"] = d_d_second[~tail_missing].sum(axis=0)
        grads.W_E = SparseRows.concat([candidate_rows, first_rows], k)
        grads.W_R = second_rows
    return loss, grads


def backward(
    instance: TrainingInstance,
    params: ModelParams,
    config: ModelConfig,
    mask: Optional[np.ndarray] = None,
) -> tuple[float, Gradients]:
    """Loss of one instance under config.variant and its gradient w.r.t. every touched parameter."""
    masks = np.ones((1, params.k)) if mask is None else mask.reshape(1, params.k)
    return backward_packed(pack_instances([instance], masks), params, config.variant)


def _chunks(instances: Sequence[TrainingInstance], k: int, max_cells: int):
    """Consecutive groups whose padded size stays under max_cells."""
    start, width = 0, 0
    for i, inst in enumerate(instances):
        width_if_added = max(width, inst.candidates.size)
        if i > start and (i - start + 1) * width_if_added * k > max_cells:
            yield start, i
            start, width_if_added = i, inst.candidates.size
        width = width_if_added
    if start < len(instances):
        yield start, len(instances)


def batch_gradients(
    instances: Sequence[TrainingInstance],
    masks: np.ndarray,
    params: ModelParams,
    variant: Variant,
    max_cells: int = settings.TRAIN_CHUNK_CELLS,
) -> tuple[float, Gradients]:
    """Sum of instance losses and gradients over a mini-batch, reduced in order."""
    total = 0.0
    parts = []
    for start, stop in _chunks(instances, params.k, max_cells):
        loss, grads = backward_packed(pack_instances(instances[start:stop], masks[start:stop]), params, variant)
        total += loss
        parts.append(grads)
    return total, Gradients.merge(parts, params.k)


# ---------------------------------------------------------------------------
# L1 regularization
# ---------------------------------------------------------------------------

def l1_norm(tensor: np.ndarray, alpha: float) -> tuple[float, np.ndarray]:
    """alpha·Σ|w| and its subgradient alpha·sign(w), with sign(0) = 0."""
    return alpha * float(np.abs(tensor).sum()), alpha * np.sign(tensor)


def l1_penalty_and_subgradient(
    params: ModelParams,
    alpha: float,
    entity_rows: Optional[np.ndarray] = None,
    relation_rows: Optional[np.ndarray] = None,
) -> tuple[float, Gradients]:
    """L1 over W_E, W_R and the four diagonals; biases are not regularized.

    Embedding rows default to the whole table; training passes only the
    rows a batch touched.
    """
    if alpha < 0:
        raise ConfigurationError(f"L1 weight must be >= 0, got {alpha}")
    k = params.k
    grads = Gradients.zeros(k)
    penalty = 0.0
    for name, rows in (("W_E", entity_rows), ("W_R", relation_rows)):
        table = getattr(params, name)
        rows = np.arange(table.shape[0]) if rows is None else np.unique(rows)
        value, sub = l1_norm(table[rows], alpha)
        penalty += value
        setattr(grads, name, SparseRows(rows.astype(np.int64), sub))
    for name in ("D_eh", "D_rh", "D_et", "D_rt"):
        value, sub = l1_norm(getattr(params, name), alpha)
        penalty += value
        grads.dense[name] = sub
    return penalty, grads


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _check_shapes(params: ModelParams, graph: KnowledgeGraph, config: ModelConfig) -> None:
    if params.n_entities != graph.n_entities:
        raise VocabularyMismatchError("entities", params.n_entities, graph.n_entities)
    if params.n_relations != graph.n_relations:
        raise VocabularyMismatchError("relations", params.n_relations, graph.n_relations)
    if params.k != config.k:
        raise ContractViolation(f"initial parameters have k={params.k}, config asks for k={config.k}")


def train(
    graph: KnowledgeGraph,
    config: ModelConfig,
    epochs: int,
    rng: RngStream,
    report_sink: Optional[ReportSink] = None,
    validation_split: Optional[str] = None,
    initial_params: Optional[ModelParams] = None,
    valid_query_limit: int = settings.VALID_QUERY_LIMIT,
) -> tuple[ModelParams, List[EpochMetrics]]:
    """Train for a fixed number of epochs.

    Every epoch rebuilds the instances (fresh corruption and negative
    samples), shuffles them, and applies one Adam step per mini-batch on
    the summed loss plus the L1 penalty of the rows the batch touched.
    With `validation_split`, the first `valid_query_limit` triples of that
    split are evaluated after each epoch.
    """
    if not graph.train:
        raise ConfigurationError("the training split is empty")
    if epochs < 0:
        raise ConfigurationError(f"epochs must be >= 0, got {epochs}")

    if initial_params is not None:
        _check_shapes(initial_params, graph, config)
        params = initial_params.copy()
    else:
        params = init_params(graph.n_entities, graph.n_relations, config.k, rng.init)
    state = AdamState.for_params(params, config.beta1, config.beta2, config.adam_eps)

    history: List[EpochMetrics] = []
    for epoch in range(1, epochs + 1):
        instances = build_instances(graph.train, graph, config.sampling_p, config.task, rng)
        order = rng.shuffle.permutation(len(instances))
        epoch_total = 0.0

        for batch_index, start in enumerate(range(0, len(instances), config.batch_size)):
            batch = [instances[i] for i in order[start:start + config.batch_size]]
            masks = np.stack([dropout_mask(config.k, config.dropout_p, rng.dropout) for _ in batch])
            data_loss, grads = batch_gradients(batch, masks, params, config.variant)
            penalty, reg = l1_penalty_and_subgradient(
                params, config.l1_weight, grads.W_E.indices, grads.W_R.indices
            )
            objective = data_loss + penalty
            if not math.isfinite(objective):
                raise TrainingDivergedError(epoch, batch_index, objective)
            adam_step(params, Gradients.merge([grads, reg], params.k), state, config.learning_rate)
            if not params.is_finite():
                raise TrainingDivergedError(epoch, batch_index, float("nan"))
            logger.debug("Epoch %d batch %d: loss=%.6f", epoch, batch_index, objective)
            epoch_total += objective

        report = None
        if validation_split:
            report = evaluate(graph, params, config, split=validation_split, limit=valid_query_limit)
        metrics = EpochMetrics(epoch=epoch, mean_loss=epoch_total / len(instances), report=report)
        if report is not None:
            logger.info(
                "Epoch %d: loss=%.6f filtered MR=%.2f filtered HITS@%d=%.4f",
                epoch, metrics.mean_loss, report.mean_rank_filtered, report.k_of_hits, report.hits_at_k_filtered,
            )
        else:
            logger.info("Epoch %d: loss=%.6f", epoch, metrics.mean_loss)
        if report_sink is not None:
            report_sink(metrics)
        history.append(metrics)

    return params, history
