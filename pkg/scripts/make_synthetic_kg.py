#!/usr/bin/env python3
"""Generate a synthetic community KG and write train/valid/test splits.

Example:
    python scripts/make_synthetic_kg.py --out data/toy --seed 0
"""

import argparse

from mohone.synth import make_community_kg


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory for the splits")
    parser.add_argument("--entities", type=int, default=200)
    parser.add_argument("--communities", type=int, default=10)
    parser.add_argument("--relations", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    kg = make_community_kg(n_entities=args.entities, n_communities=args.communities,
                           n_relations=args.relations, seed=args.seed)
    train, valid, test = kg.write_splits(args.out)
    print(f"train: {train} ({len(kg.train)} triples)")
    print(f"valid: {valid} ({len(kg.valid)} triples)")
    print(f"test:  {test} ({len(kg.test)} triples)")


if __name__ == "__main__":
    main()
