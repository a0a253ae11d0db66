"""Synthetic knowledge graphs with planted community structure.

Entities are grouped into equal-size communities, and each relation carries a
community-level pattern: which source community links to which target
community. Entities in the same community therefore share relation patterns
and neighborhoods, so network structure is genuinely informative for link
prediction, which is what the retrofitting stage is supposed to exploit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import TripleStore, Vocab


@dataclass
class SyntheticKG:
    train: list
    valid: list
    test: list
    entity_tokens: list
    relation_tokens: list
    community: np.ndarray  # community id per entity

    def all_token_triples(self):
        return self.train + self.valid + self.test

    def write_splits(self, out_dir) -> tuple[str, str, str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, rows in (("train.txt", self.train), ("valid.txt", self.valid), ("test.txt", self.test)):
            p = out / name
            with open(p, "w", encoding="utf-8") as f:
                for h, r, t in rows:
                    f.write(f"{h}\t{r}\t{t}\n")
            paths.append(str(p))
        return tuple(paths)


def make_community_kg(n_entities: int = 200, n_communities: int = 10,
                      n_relations: int = 5, tails_per_pair: int = 2,
                      triple_prob: float = 0.8, cold_frac: float = 0.35,
                      cold_test_prob: float = 0.6, warm_test_prob: float = 0.05,
                      valid_frac: float = 0.08, seed: int = 0) -> SyntheticKG:
    """Sample a KG whose relations connect communities, not individuals.

    Communities sit on a chain and relation j shifts a source community
    j % 3 steps up the chain (no wraparound, so the community-level graph is
    acyclic and representable by translations; shift 0 links entities within
    one community, which also makes communities internally dense in the
    projected entity graph). Each (entity, relation) pair emits a few
    uniformly chosen tails from the target community.

    A cold fraction of entities has most of its triples routed to the test
    split, leaving thin first-order training evidence for them while the
    surrounding graph still pins down their neighborhoods: the regime where
    network structure carries information that triples alone do not.
    """
    if n_entities % n_communities != 0:
        raise ValueError("n_entities must be a multiple of n_communities")
    rng = np.random.default_rng(seed)
    size = n_entities // n_communities
    community = np.repeat(np.arange(n_communities), size)
    entity_tokens = [f"e{c}_{i}" for i, c in enumerate(community)]
    relation_tokens = [f"r{j}" for j in range(n_relations)]
    shifts = [j % 3 for j in range(n_relations)]

    triples = []
    for h in range(n_entities):
        for r in range(n_relations):
            tgt = community[h] + shifts[r]
            if tgt >= n_communities or rng.random() >= triple_prob:
                continue
            members = np.arange(tgt * size, (tgt + 1) * size)
            # intra-community relations are denser, as in real KGs where
            # same-type entities share many links
            n_tails = 2 * tails_per_pair if shifts[r] == 0 else tails_per_pair
            tails = rng.choice(members, size=min(n_tails, members.size), replace=False)
            for t in tails:
                if t != h:
                    triples.append((entity_tokens[h], relation_tokens[r], entity_tokens[int(t)]))

    order = rng.permutation(len(triples))
    triples = [triples[i] for i in order]
    cold = set(rng.choice(n_entities, size=int(cold_frac * n_entities), replace=False).tolist())
    cold_tokens = {entity_tokens[i] for i in cold}
    train, valid, test = [], [], []
    for row in triples:
        is_cold = row[0] in cold_tokens or row[2] in cold_tokens
        p_test = cold_test_prob if is_cold else warm_test_prob
        u = rng.random()
        if u < p_test:
            test.append(row)
        elif u < p_test + valid_frac:
            valid.append(row)
        else:
            train.append(row)

    # every entity and relation must be anchored in train, or its embedding
    # is untrainable and its test queries get skipped
    seen_e = {h for h, _, t in train} | {t for _, _, t in train}
    seen_r = {r for _, r, _ in train}

    def anchored(rows):
        kept = []
        for h, r, t in rows:
            if h in seen_e and t in seen_e and r in seen_r:
                kept.append((h, r, t))
            else:
                train.append((h, r, t))
                seen_e.update((h, t))
                seen_r.add(r)
        return kept

    valid = anchored(valid)
    test = anchored(test)

    return SyntheticKG(train=train, valid=valid, test=test,
                       entity_tokens=entity_tokens, relation_tokens=relation_tokens,
                       community=community)


def store_from_token_triples(rows) -> TripleStore:
    """Build a TripleStore directly from in-memory token triples."""
    ev, rv = Vocab(), Vocab()
    triples = [(ev.add(h), rv.add(r), ev.add(t)) for h, r, t in rows]
    return TripleStore(triples=triples, entity_vocab=ev, relation_vocab=rv)
