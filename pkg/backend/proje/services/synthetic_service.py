"""Synthetic block-structured knowledge graph with a known completion rule.

Entities are split into equal blocks. Relation r sends block b to block
(a_r·b + r + 1) mod n_blocks, with a_r coprime to n_blocks so every
relation permutes the blocks, and each head is linked to every entity of
its target block.
"""

import logging
import math
import os
from typing import List

import numpy as np

from ..exceptions import ConfigurationError
from .graph_service import KnowledgeGraph, Triple, Vocabulary, write_triples

logger = logging.getLogger(__name__)


def _multipliers(n_blocks: int) -> List[int]:
    return [a for a in range(1, max(n_blocks, 2) * 2) if math.gcd(a, n_blocks) == 1]


def block_triples(n_entities: int, n_relations: int, block_size: int) -> List[Triple]:
    if n_entities % block_size:
        raise ConfigurationError(f"{n_entities} entities cannot be split into blocks of {block_size}")
    n_blocks = n_entities // block_size
    multipliers = _multipliers(n_blocks)
    triples = []
    for r in range(n_relations):
        a = multipliers[r % len(multipliers)]
        for h in range(n_entities):
            target = (a * (h // block_size) + r + 1) % n_blocks
            for t in range(target * block_size, (target + 1) * block_size):
                triples.append(Triple(h, r, t))
    return triples


def make_block_graph(
    n_entities: int = 200,
    n_relations: int = 5,
    block_size: int = 10,
    test_fraction: float = 0.1,
    valid_fraction: float = 0.0,
    seed: int = 0,
) -> KnowledgeGraph:
    """Shuffle the block triples and hold out test (and optionally valid) triples.

    Held-out triples naming an entity or relation that no training triple
    mentions are moved back to train.
    """
    vocab = Vocabulary.from_names(
        [f"e{i:03d}" for i in range(n_entities)],
        [f"r{i}" for i in range(n_relations)],
    )
    triples = block_triples(n_entities, n_relations, block_size)
    order = np.random.default_rng(seed).permutation(len(triples))
    shuffled = [triples[i] for i in order]

    n_test = round(test_fraction * len(shuffled))
    n_valid = round(valid_fraction * len(shuffled))
    test = shuffled[:n_test]
    valid = shuffled[n_test:n_test + n_valid]
    train = shuffled[n_test + n_valid:]

    seen_entities = {h for h, _, _ in train} | {t for _, _, t in train}
    seen_relations = {r for _, r, _ in train}

    def covered(triple: Triple) -> bool:
        return triple.head in seen_entities and triple.tail in seen_entities and triple.relation in seen_relations

    moved = [x for x in test + valid if not covered(x)]
    if moved:
        logger.warning("Moved %d held-out triple(s) back to train", len(moved))
        train = train + moved
        test = [x for x in test if covered(x)]
        valid = [x for x in valid if covered(x)]
    return KnowledgeGraph.from_splits(vocab, train, valid, test)


def write_graph(graph: KnowledgeGraph, directory: str) -> dict[str, str]:
    """Write train.txt / valid.txt / test.txt into `directory`."""
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for split in ("train", "valid", "test"):
        path = os.path.join(directory, f"{split}.txt")
        write_triples(path, graph.split(split), graph.vocab)
        paths[split] = path
    return paths
