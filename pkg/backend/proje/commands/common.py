"""Shared CLI plumbing: exit codes, flag groups, effective configuration."""

import argparse
import functools
import json
import logging
import sys
from typing import Callable, Optional

from pydantic import ValidationError

from ..exceptions import ConfigurationError, ProjeError
from ..schemas import ModelConfig, Task, Variant
from ..services.graph_service import KnowledgeGraph, load_graph
from ..task_data import get_defaults_for_task

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# CLI flag -> ModelConfig field
_CONFIG_FLAGS = {
    "k": "k",
    "lr": "learning_rate",
    "batch": "batch_size",
    "alpha": "l1_weight",
    "dropout": "dropout_p",
    "py": "sampling_p",
}


class UsageError(ConfigurationError):
    """Flags that parse individually but do not make sense together."""


def cli_command(func: Callable[[argparse.Namespace], int]) -> Callable[[argparse.Namespace], int]:
    """Map failures to exit codes: 2 for usage/configuration, 1 for runtime errors."""

    @functools.wraps(func)
    def wrapper(args: argparse.Namespace) -> int:
        try:
            return func(args)
        except (ValidationError, ConfigurationError) as e:
            logger.error("Invalid configuration: %s", e)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except (ProjeError, OSError) as e:
            logger.error("%s failed: %s", func.__name__, e)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAILURE

    return wrapper


def add_graph_arguments(parser: argparse.ArgumentParser, train_required: bool = True) -> None:
    group = parser.add_argument_group("graph")
    group.add_argument("--train", required=train_required, help="Training triples (TSV head, relation, tail)")
    group.add_argument("--valid", help="Validation triples")
    group.add_argument("--test", help="Test triples")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--task", choices=[t.value for t in Task], default=Task.ENTITY.value)
    group.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.WLISTWISE.value)
    group.add_argument("--k", type=int, help="Embedding size")
    group.add_argument("--lr", type=float, help="Adam learning rate")
    group.add_argument("--batch", type=int, help="Mini-batch size")
    group.add_argument("--alpha", type=float, help="L1 regularizer weight")
    group.add_argument("--dropout", type=float, help="Dropout probability p_d")
    group.add_argument("--py", type=float, help="Negative candidate sampling probability p_y")


def build_config(args: argparse.Namespace) -> ModelConfig:
    """Task defaults overridden by whichever flags were given."""
    defaults = get_defaults_for_task(args.task)
    values = {field: defaults[field] for field in _CONFIG_FLAGS.values()}
    for flag, field in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field] = value
    return ModelConfig(task=Task(args.task), variant=Variant(args.variant), **values)


def echo_config(config: ModelConfig, **extra) -> None:
    """Print the full effective configuration before any work starts."""
    payload = {**config.model_dump(mode="json"), **extra}
    print("Effective configuration: " + json.dumps(payload, sort_keys=True))


def load_graph_from_args(args: argparse.Namespace) -> KnowledgeGraph:
    return load_graph(args.train, getattr(args, "valid", None), getattr(args, "test", None))


def vocab_paths(checkpoint_path: str, entities: Optional[str] = None, relations: Optional[str] = None) -> tuple[str, str]:
    """Vocabulary dump locations, defaulting to files beside the checkpoint."""
    return entities or f"{checkpoint_path}.entities.tsv", relations or f"{checkpoint_path}.relations.tsv"
