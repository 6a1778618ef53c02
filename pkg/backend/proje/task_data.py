"""Static per-task hyperparameter defaults and the sampling-rate grid.

Values follow the published settings: lr=0.01, b=200, alpha=1e-5 and
p_d=0.5 for both tasks; k=200, p_y=0.5 for entity prediction and k=100,
p_y=0.75 for relation prediction. HITS cut-offs follow the reporting
tables (HITS@10 for entities, HITS@1 for relations).
"""

from typing import Optional, TypedDict

from .schemas import Task


class TaskDefaults(TypedDict):
    k: int
    sampling_p: float
    learning_rate: float
    batch_size: int
    l1_weight: float
    dropout_p: float
    hits_k: int


TASK_DEFAULTS: dict[Task, TaskDefaults] = {
    Task.ENTITY: {
        "k": 200,
        "sampling_p": 0.5,
        "learning_rate": 0.01,
        "batch_size": 200,
        "l1_weight": 1e-5,
        "dropout_p": 0.5,
        "hits_k": 10,
    },
    Task.RELATION: {
        "k": 100,
        "sampling_p": 0.75,
        "learning_rate": 0.01,
        "batch_size": 200,
        "l1_weight": 1e-5,
        "dropout_p": 0.5,
        "hits_k": 1,
    },
}

DEFAULT_EPOCHS = 100
DEFAULT_SEED = 0

SWEEP_RATES: tuple[float, ...] = (0.05, 0.25, 0.50, 0.75, 0.95)


def get_defaults_for_task(task: Task | str) -> TaskDefaults:
    """Return the defaults for a task given as enum or its string value."""
    return TASK_DEFAULTS[Task(task)]


def get_hits_k_for_task(task: Task | str, override: Optional[int] = None) -> int:
    if override is not None:
        return override
    return get_defaults_for_task(task)["hits_k"]
