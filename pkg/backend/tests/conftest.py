import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest

from proje.models import ModelParams
from proje.services.graph_service import KnowledgeGraph, Triple, Vocabulary
from proje.services.synthetic_service import make_block_graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def make_params():
    """Factory for random parameters with every tensor drawn from U[-scale, scale]."""

    def _make(n_entities: int, n_relations: int, k: int, seed: int = 0, scale: float = 0.8) -> ModelParams:
        gen = np.random.default_rng(seed)
        return ModelParams(
            W_E=gen.uniform(-scale, scale, (n_entities, k)),
            W_R=gen.uniform(-scale, scale, (n_relations, k)),
            D_eh=gen.uniform(-scale, scale, k),
            D_rh=gen.uniform(-scale, scale, k),
            D_et=gen.uniform(-scale, scale, k),
            D_rt=gen.uniform(-scale, scale, k),
            b_c=gen.uniform(-scale, scale, k),
            b_p=gen.uniform(-scale, scale, 1),
        )

    return _make


@pytest.fixture
def small_graph() -> KnowledgeGraph:
    """Six entities, two relations; (0, 0) has two true tails."""
    vocab = Vocabulary.from_names(
        ["alice", "bob", "carol", "dave", "erin", "frank"],
        ["knows", "likes"],
    )
    train = [
        Triple(0, 0, 1), Triple(0, 0, 2), Triple(1, 0, 2), Triple(2, 0, 3),
        Triple(3, 0, 4), Triple(4, 0, 5), Triple(0, 1, 5), Triple(1, 1, 4),
        Triple(2, 1, 3), Triple(5, 1, 0), Triple(3, 1, 1), Triple(4, 1, 2),
    ]
    valid = [Triple(5, 0, 1)]
    test = [Triple(1, 0, 3), Triple(2, 1, 0)]
    return KnowledgeGraph.from_splits(vocab, train, valid, test)


@pytest.fixture
def small_graph_files(tmp_path, small_graph):
    """The small graph written as TSV files; returns {split: path}."""
    paths = {}
    for split in ("train", "valid", "test"):
        path = tmp_path / f"{split}.txt"
        lines = [
            f"{small_graph.vocab.entity_names[h]}\t{small_graph.vocab.relation_names[r]}\t{small_graph.vocab.entity_names[t]}\n"
            for h, r, t in small_graph.split(split)
        ]
        path.write_text("".join(lines), encoding="utf-8")
        paths[split] = str(path)
    return paths


@pytest.fixture(scope="session")
def block_graph() -> KnowledgeGraph:
    return make_block_graph()
