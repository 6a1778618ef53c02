"""Adam with lazy (row-sparse) updates for the embedding tables."""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..models import DENSE_TENSORS, EMBEDDING_TENSORS, Gradients, ModelParams

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment accumulators mirroring every parameter tensor."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        tensors = params.tensors()
        return cls(
            m={name: np.zeros_like(t) for name, t in tensors.items()},
            v={name: np.zeros_like(t) for name, t in tensors.items()},
            t=0,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params: ModelParams, grads: Gradients, state: AdamState, lr: float) -> tuple[ModelParams, AdamState]:
    """Apply one bias-corrected Adam update in place.

    Dense tensors are updated every step. Embedding rows are updated only
    when the batch produced a gradient for them; moments of untouched rows
    are left as they were.
    """
    grads = grads.coalesced()
    state.t += 1
    beta1, beta2 = state.beta1, state.beta2
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t

    for name in DENSE_TENSORS:
        g = grads.dense[name]
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        getattr(params, name)[...] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)

    for name in EMBEDDING_TENSORS:
        rows = getattr(grads, name)
        if rows.indices.size == 0:
            continue
        idx, g = rows.indices, rows.values
        m_rows = beta1 * state.m[name][idx] + (1.0 - beta1) * g
        v_rows = beta2 * state.v[name][idx] + (1.0 - beta2) * (g * g)
        state.m[name][idx] = m_rows
        state.v[name][idx] = v_rows
        getattr(params, name)[idx] -= lr * (m_rows / bc1) / (np.sqrt(v_rows / bc2) + state.eps)

    return params, state
