"""Pydantic configuration and report schemas."""

from enum import Enum
from typing import ClassVar, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class Task(str, Enum):
    ENTITY = "entity"
    RELATION = "relation"


class Variant(str, Enum):
    POINTWISE = "pointwise"
    LISTWISE = "listwise"
    WLISTWISE = "wlistwise"


class ModelConfig(BaseModel):
    """Hyperparameters of one training run.

    Field bounds are the model's invariants; per-task defaults live in
    task_data.TASK_DEFAULTS.
    """

    model_config = ConfigDict(frozen=True)

    task: Task = Task.ENTITY
    variant: Variant = Variant.WLISTWISE
    k: int = Field(200, ge=1)
    learning_rate: float = Field(0.01, gt=0)
    batch_size: int = Field(200, ge=1)
    l1_weight: float = Field(1e-5, ge=0)
    dropout_p: float = Field(0.5, ge=0, lt=1)
    sampling_p: float = Field(0.5, ge=0, le=1)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".10g")


class EvalReport(BaseModel):
    task: Task
    split: str
    mean_rank_raw: float
    mean_rank_filtered: float
    hits_at_k_raw: float
    hits_at_k_filtered: float
    k_of_hits: int
    n_queries: int

    CSV_COLUMNS: ClassVar[List[str]] = [
        "task", "split", "mr_raw", "mr_filtered", "hits_raw", "hits_filtered", "k", "n_queries",
    ]

    def csv_row(self) -> List[str]:
        return [
            self.task.value,
            self.split,
            _fmt(self.mean_rank_raw),
            _fmt(self.mean_rank_filtered),
            _fmt(self.hits_at_k_raw),
            _fmt(self.hits_at_k_filtered),
            str(self.k_of_hits),
            str(self.n_queries),
        ]


class EpochMetrics(BaseModel):
    epoch: int
    mean_loss: float
    report: Optional[EvalReport] = None

    CSV_COLUMNS: ClassVar[List[str]] = [
        "epoch", "mean_loss", "mr_raw", "mr_filtered", "hits_raw", "hits_filtered",
    ]

    def csv_row(self) -> List[str]:
        r = self.report
        return [
            str(self.epoch),
            _fmt(self.mean_loss),
            _fmt(r.mean_rank_raw if r else None),
            _fmt(r.mean_rank_filtered if r else None),
            _fmt(r.hits_at_k_raw if r else None),
            _fmt(r.hits_at_k_filtered if r else None),
        ]


class SweepRow(BaseModel):
    sampling_p: float
    report: EvalReport

    CSV_COLUMNS: ClassVar[List[str]] = [
        "p_y", "mr_raw", "mr_filtered", "hits_raw", "hits_filtered", "k", "n_queries",
    ]

    def csv_row(self) -> List[str]:
        r = self.report
        return [
            _fmt(self.sampling_p),
            _fmt(r.mean_rank_raw),
            _fmt(r.mean_rank_filtered),
            _fmt(r.hits_at_k_raw),
            _fmt(r.hits_at_k_filtered),
            str(r.k_of_hits),
            str(r.n_queries),
        ]


class CheckpointHeader(BaseModel):
    format_version: int
    task: Task
    variant: Variant
    n_entities: int
    n_relations: int
    k: int
