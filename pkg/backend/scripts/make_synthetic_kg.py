"""Write the synthetic block-structured knowledge graph as TSV splits.

Usage:
    python make_synthetic_kg.py --out data/blocks
    python make_synthetic_kg.py --out data/blocks --valid-fraction 0.05 --seed 3
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from dotenv import load_dotenv

load_dotenv(os.path.join(os.path.dirname(__file__), "..", ".env"))

from proje.services.synthetic_service import make_block_graph, write_graph


def main() -> None:
    parser = argparse.ArgumentParser(description="Generate the synthetic block graph")
    parser.add_argument("--out", required=True, help="Directory for train.txt / valid.txt / test.txt")
    parser.add_argument("--entities", type=int, default=200)
    parser.add_argument("--relations", type=int, default=5)
    parser.add_argument("--block-size", type=int, default=10)
    parser.add_argument("--test-fraction", type=float, default=0.1)
    parser.add_argument("--valid-fraction", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    graph = make_block_graph(
        n_entities=args.entities,
        n_relations=args.relations,
        block_size=args.block_size,
        test_fraction=args.test_fraction,
        valid_fraction=args.valid_fraction,
        seed=args.seed,
    )
    for split, path in write_graph(graph, args.out).items():
        print(f"{split}: {len(graph.split(split))} triples -> {path}")


if __name__ == "__main__":
    main()
