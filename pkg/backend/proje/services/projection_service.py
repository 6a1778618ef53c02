"""Forward mathematics: combination operator, projection scores and losses.

f is tanh; g is sigmoid (pointwise) or softmax (listwise, wlistwise).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..exceptions import ContractViolation
from ..models import Direction, ModelParams, TrainingInstance
from ..schemas import Variant

logger = logging.getLogger(__name__)

LOG_EPS = 1e-12


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax with max-logit subtraction; -inf entries get probability 0."""
    x = np.asarray(x, dtype=np.float64)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def deployed_scores(logits: np.ndarray, variant: Variant) -> np.ndarray:
    """Ranking scores used at inference: sigmoid per candidate or softmax per row."""
    if Variant(variant) is Variant.POINTWISE:
        return sigmoid(logits)
    return softmax(logits, axis=-1)


# ---------------------------------------------------------------------------
# Single-instance forward
# ---------------------------------------------------------------------------

def combine(e_vec: np.ndarray, r_vec: np.ndarray, direction: Direction, params: ModelParams) -> np.ndarray:
    """D_e ⊙ e + D_r ⊙ r + b_c with the diagonal pair selected by direction."""
    e_vec = np.asarray(e_vec, dtype=np.float64)
    r_vec = np.asarray(r_vec, dtype=np.float64)
    if e_vec.shape != (params.k,) or r_vec.shape != (params.k,):
        raise ContractViolation(
            f"combine expects two vectors of length {params.k}, got {e_vec.shape} and {r_vec.shape}"
        )
    d_first, d_second = params.diagonals_for(direction)
    return d_first * e_vec + d_second * r_vec + params.b_c


def input_vectors(instance: TrainingInstance, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    if instance.direction is Direction.RELATION_MISSING:
        return params.W_E[instance.known_entity], params.W_E[instance.other_entity]
    return params.W_E[instance.known_entity], params.W_R[instance.relation]


def candidate_table(params: ModelParams, direction: Direction) -> np.ndarray:
    return params.W_R if direction is Direction.RELATION_MISSING else params.W_E


def candidate_logits(
    instance: TrainingInstance,
    params: ModelParams,
    dropout_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    e_vec, r_vec = input_vectors(instance, params)
    combined = combine(e_vec, r_vec, instance.direction, params)
    if dropout_mask is not None:
        if dropout_mask.shape != combined.shape:
            raise ContractViolation(f"dropout mask must have length {params.k}")
        combined = combined * dropout_mask
    hidden = np.tanh(combined)
    w_c = candidate_table(params, instance.direction)[instance.candidates]
    return w_c @ hidden + params.b_p[0]


def score_pointwise(
    instance: TrainingInstance,
    params: ModelParams,
    dropout_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    return sigmoid(candidate_logits(instance, params, dropout_mask))


def score_listwise(
    instance: TrainingInstance,
    params: ModelParams,
    dropout_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    return softmax(candidate_logits(instance, params, dropout_mask))


def score_instance(
    instance: TrainingInstance,
    params: ModelParams,
    variant: Variant,
    dropout_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    if Variant(variant) is Variant.POINTWISE:
        return score_pointwise(instance, params, dropout_mask)
    return score_listwise(instance, params, dropout_mask)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def _clamped_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.clip(p, LOG_EPS, 1.0 - LOG_EPS))


def loss_pointwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """Sigmoid cross-entropy summed over positives and the sampled negatives."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(-(y * _clamped_log(scores)).sum() - ((1.0 - y) * _clamped_log(1.0 - scores)).sum())


def loss_listwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """Softmax cross-entropy against the target 1/|positives| on each positive."""
    y = np.asarray(labels, dtype=np.float64)
    return float(-((y / y.sum()) * _clamped_log(scores)).sum())


def loss_wlistwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """Listwise loss weighted by the number of positives."""
    y = np.asarray(labels, dtype=np.float64)
    return float(-(y * _clamped_log(scores)).sum())


def instance_loss(scores: np.ndarray, labels: np.ndarray, variant: Variant) -> float:
    variant = Variant(variant)
    if variant is Variant.POINTWISE:
        return loss_pointwise(scores, labels)
    if variant is Variant.LISTWISE:
        return loss_listwise(scores, labels)
    return loss_wlistwise(scores, labels)


# ---------------------------------------------------------------------------
# Parameter accounting
# ---------------------------------------------------------------------------

def count_parameters(params: ModelParams) -> int:
    """Number of learnable scalars, counted tensor by tensor."""
    return sum(int(t.size) for t in params.tensors().values())


def expected_parameter_count(n_entities: int, n_relations: int, k: int) -> int:
    return n_entities * k + n_relations * k + 5 * k + 1


# ---------------------------------------------------------------------------
# Vectorized forward over many queries
# ---------------------------------------------------------------------------

@dataclass
class HiddenStates:
    first: np.ndarray
    second: np.ndarray
    d_first: np.ndarray
    d_second: np.ndarray
    hidden: np.ndarray


def _diagonal_rows(params: ModelParams, directions: Sequence[Direction]) -> tuple[np.ndarray, np.ndarray]:
    pairs = {d: params.diagonals_for(d) for d in set(directions)}
    d_first = np.stack([pairs[d][0] for d in directions])
    d_second = np.stack([pairs[d][1] for d in directions])
    return d_first, d_second


def _second_table(params: ModelParams, directions: Sequence[Direction]) -> np.ndarray:
    relation_mode = {d is Direction.RELATION_MISSING for d in directions}
    if len(relation_mode) > 1:
        raise ContractViolation("cannot mix relation and entity queries in one batch")
    return params.W_E if relation_mode.pop() else params.W_R


def hidden_states(
    params: ModelParams,
    first_ids: np.ndarray,
    second_ids: np.ndarray,
    directions: Sequence[Direction],
    masks: Optional[np.ndarray] = None,
) -> HiddenStates:
    """tanh(dropout(combine(...))) for a batch of queries, with the pieces backward needs."""
    first = params.W_E[first_ids]
    second = _second_table(params, directions)[second_ids]
    d_first, d_second = _diagonal_rows(params, directions)
    combined = d_first * first + d_second * second + params.b_c
    if masks is not None:
        combined = combined * masks
    return HiddenStates(first, second, d_first, d_second, np.tanh(combined))


def query_logits(
    params: ModelParams,
    first_ids: np.ndarray,
    second_ids: np.ndarray,
    directions: Sequence[Direction],
) -> np.ndarray:
    """Logits of every candidate (all entities, or all relations) per query, no dropout."""
    states = hidden_states(params, first_ids, second_ids, directions)
    table = candidate_table(params, directions[0])
    return states.hidden @ table.T + params.b_p[0]
