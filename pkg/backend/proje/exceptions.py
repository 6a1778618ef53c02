"""Error hierarchy shared by the library and the CLI."""

from typing import List, Optional


class ProjeError(Exception):
    """Base class for every error this package raises on purpose."""


class TripleParseError(ProjeError, ValueError):
    def __init__(self, path: str, line_number: int, detail: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {detail}")


class VocabularyError(ProjeError, ValueError):
    """An entity or relation name (or ID) outside the fixed vocabulary."""

    def __init__(self, kind: str, token: str, suggestions: Optional[List[str]] = None):
        self.kind = kind
        self.token = token
        self.suggestions = suggestions or []
        message = f"Unknown {kind}: {token!r}"
        if self.suggestions:
            message += f" (did you mean: {', '.join(self.suggestions)})"
        super().__init__(message)


class VocabularyMismatchError(ProjeError, ValueError):
    def __init__(self, kind: str, checkpoint_size: int, graph_size: int):
        self.kind = kind
        self.checkpoint_size = checkpoint_size
        self.graph_size = graph_size
        super().__init__(
            f"Checkpoint has {checkpoint_size} {kind} but the graph has {graph_size}"
        )


class ConfigurationError(ProjeError, ValueError):
    pass


class ContractViolation(ProjeError, ValueError):
    pass


class TrainingDivergedError(ProjeError, RuntimeError):
    def __init__(self, epoch: int, batch_index: int, loss: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(
            f"Non-finite loss {loss!r} at epoch {epoch}, batch {batch_index}"
        )


class CheckpointError(ProjeError, ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ChecksumMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class CheckpointSizeError(CheckpointError):
    pass
