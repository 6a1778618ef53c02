"""Numpy-backed domain objects: learnable parameters, training instances, gradients."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional

import numpy as np

from .exceptions import ContractViolation

# Fixed tensor order: checkpoint layout, initialization order and parameter walks
TENSOR_ORDER = ("W_E", "W_R", "D_eh", "D_rh", "D_et", "D_rt", "b_c", "b_p")
EMBEDDING_TENSORS = ("W_E", "W_R")
DENSE_TENSORS = ("D_eh", "D_rh", "D_et", "D_rt", "b_c", "b_p")
# Biases are not regularized
REGULARIZED_TENSORS = ("W_E", "W_R", "D_eh", "D_rh", "D_et", "D_rt")


class Direction(str, Enum):
    TAIL_MISSING = "tail"          # head and relation known
    HEAD_MISSING = "head"          # relation and tail known
    RELATION_MISSING = "relation"  # head and tail known


@dataclass
class ModelParams:
    """Every learnable tensor of the model.

    W_E (n_e × k) and W_R (n_r × k) hold the embeddings. The four length-k
    vectors are the diagonals of the combination matrices: D_eh/D_rh when
    the head is known, D_et/D_rt when the tail is known. b_c is the
    combination bias and b_p the projection bias (stored as a 1-element
    array so it can be updated in place).
    """

    W_E: np.ndarray
    W_R: np.ndarray
    D_eh: np.ndarray
    D_rh: np.ndarray
    D_et: np.ndarray
    D_rt: np.ndarray
    b_c: np.ndarray
    b_p: np.ndarray

    def __post_init__(self) -> None:
        if self.W_E.ndim != 2 or self.W_R.ndim != 2:
            raise ContractViolation("Embedding tables must be 2-D")
        k = self.W_E.shape[1]
        if self.W_R.shape[1] != k:
            raise ContractViolation(
                f"Entity and relation embeddings disagree on k: {k} vs {self.W_R.shape[1]}"
            )
        for name in ("D_eh", "D_rh", "D_et", "D_rt", "b_c"):
            if getattr(self, name).shape != (k,):
                raise ContractViolation(f"{name} must have shape ({k},), got {getattr(self, name).shape}")
        if self.b_p.shape != (1,):
            raise ContractViolation(f"b_p must have shape (1,), got {self.b_p.shape}")

    @classmethod
    def zeros(cls, n_entities: int, n_relations: int, k: int) -> "ModelParams":
        return cls(
            W_E=np.zeros((n_entities, k)),
            W_R=np.zeros((n_relations, k)),
            D_eh=np.zeros(k),
            D_rh=np.zeros(k),
            D_et=np.zeros(k),
            D_rt=np.zeros(k),
            b_c=np.zeros(k),
            b_p=np.zeros(1),
        )

    @property
    def k(self) -> int:
        return self.W_E.shape[1]

    @property
    def n_entities(self) -> int:
        return self.W_E.shape[0]

    @property
    def n_relations(self) -> int:
        return self.W_R.shape[0]

    def tensors(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_ORDER}

    def copy(self) -> "ModelParams":
        return ModelParams(**{name: t.copy() for name, t in self.tensors().items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(t).all() for t in self.tensors().values())

    def diagonals_for(self, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
        """(D_first, D_second) weighting the two known inputs of a query."""
        if direction is Direction.TAIL_MISSING:
            return self.D_eh, self.D_rh
        if direction is Direction.HEAD_MISSING:
            return self.D_et, self.D_rt
        # Relation queries weight the head with D_eh and the tail with D_et
        return self.D_eh, self.D_et


@dataclass(frozen=True)
class TrainingInstance:
    """One query with its candidate list and binary labels.

    For entity queries `known_entity` and `relation` are the inputs; for
    relation queries the inputs are `known_entity` (head) and
    `other_entity` (tail).
    """

    known_entity: int
    relation: Optional[int]
    direction: Direction
    candidates: np.ndarray
    labels: np.ndarray
    other_entity: Optional[int] = None

    def __post_init__(self) -> None:
        if self.candidates.shape != self.labels.shape or self.candidates.ndim != 1:
            raise ContractViolation("candidates and labels must be aligned 1-D arrays")
        if not (self.labels == 1).any():
            raise ContractViolation("an instance needs at least one positive candidate")
        if np.unique(self.candidates).size != self.candidates.size:
            raise ContractViolation("candidates must not repeat")
        if self.direction is Direction.RELATION_MISSING:
            if self.other_entity is None:
                raise ContractViolation("relation queries need both head and tail")
        elif self.relation is None:
            raise ContractViolation("entity queries need a relation")

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())


@dataclass
class SparseRows:
    """Row-sparse gradient of an embedding table: row ids and their vectors.

    Ids may repeat until `coalesce` sums them.
    """

    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls, k: int) -> "SparseRows":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, k)))

    @classmethod
    def concat(cls, parts: Iterable["SparseRows"], k: int) -> "SparseRows":
        parts = list(parts)
        if not parts:
            return cls.empty(k)
        return cls(
            np.concatenate([p.indices for p in parts]).astype(np.int64, copy=False),
            np.concatenate([p.values for p in parts], axis=0),
        )

    def coalesce(self) -> "SparseRows":
        """Sum repeated ids; the result is sorted by id."""
        if self.indices.size == 0:
            return SparseRows.empty(self.values.shape[1])
        order = np.argsort(self.indices, kind="stable")
        ids = self.indices[order]
        unique, starts = np.unique(ids, return_index=True)
        summed = np.add.reduceat(self.values[order], starts, axis=0)
        return SparseRows(unique.astype(np.int64), summed)

    def to_dense(self, n_rows: int) -> np.ndarray:
        rows = self.coalesce()
        dense = np.zeros((n_rows, self.values.shape[1]))
        dense[rows.indices] = rows.values
        return dense


@dataclass
class Gradients:
    W_E: SparseRows
    W_R: SparseRows
    dense: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, k: int) -> "Gradients":
        dense = {name: np.zeros(k) for name in DENSE_TENSORS if name != "b_p"}
        dense["b_p"] = np.zeros(1)
        return cls(SparseRows.empty(k), SparseRows.empty(k), dense)

    @classmethod
    def merge(cls, parts: Iterable["Gradients"], k: int) -> "Gradients":
        """Sum gradients in the order given."""
        parts = list(parts)
        merged = cls.zeros(k)
        merged.W_E = SparseRows.concat([p.W_E for p in parts], k)
        merged.W_R = SparseRows.concat([p.W_R for p in parts], k)
        for part in parts:
            for name, value in part.dense.items():
                merged.dense[name] = merged.dense[name] + value
        return merged

    def coalesced(self) -> "Gradients":
        return Gradients(self.W_E.coalesce(), self.W_R.coalesce(), dict(self.dense))

    def to_dense(self, params: ModelParams) -> Dict[str, np.ndarray]:
        """Full-shape gradient per tensor, in TENSOR_ORDER."""
        out = {
            "W_E": self.W_E.to_dense(params.n_entities),
            "W_R": self.W_R.to_dense(params.n_relations),
        }
        for name in DENSE_TENSORS:
            out[name] = self.dense[name].copy()
        return out
