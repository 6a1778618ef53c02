"""Seeded random streams, one independent substream per concern."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError

# Spawn order is part of the reproducibility contract; append, never reorder
_SUBSTREAMS = ("corruption", "sampling", "dropout", "shuffle", "init")


@dataclass
class RngStream:
    """Independent numpy Generators derived from one 64-bit seed.

    Each concern draws from its own substream, so changing how often one
    of them is used never shifts the numbers another one sees.
    """

    seed: int
    corruption: np.random.Generator
    sampling: np.random.Generator
    dropout: np.random.Generator
    shuffle: np.random.Generator
    init: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStream":
        if not 0 <= seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}")
        children = np.random.SeedSequence(seed).spawn(len(_SUBSTREAMS))
        generators = {name: np.random.Generator(np.random.PCG64(child)) for name, child in zip(_SUBSTREAMS, children)}
        return cls(seed=seed, **generators)
