"""Knowledge-graph ingestion and projection to a plain undirected graph.

Triple files are UTF-8 text with one "head<TAB>relation<TAB>tail" per line
and no header (the usual FB15K-237 / WN18RR distribution format). Everything
built here is treated as read-only after construction and is safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class TripleFileError(ValueError):
    """Unreadable or malformed triple file; carries the offending line number."""

    def __init__(self, message: str, path=None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        loc = str(path) if path is not None else ""
        if line_no is not None:
            loc += f":{line_no}"
        super().__init__(f"{loc}: {message}" if loc else message)


class Vocab:
    """Bijective token <-> integer-id map, ids assigned in first-seen order."""

    def __init__(self, tokens=()):
        self.tokens: list[str] = []
        self.index: dict[str, int] = {}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        tid = self.index.get(token)
        if tid is None:
            tid = len(self.tokens)
            self.index[token] = tid
            self.tokens.append(token)
        return tid

    def id(self, token: str) -> int:
        return self.index[token]

    def get(self, token: str, default: int = -1) -> int:
        return self.index.get(token, default)

    def token(self, tid: int) -> str:
        return self.tokens[tid]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


@dataclass
class TripleStore:
    """Id-encoded (head, relation, tail) triples plus their vocabularies."""

    triples: list[tuple[int, int, int]]
    entity_vocab: Vocab
    relation_vocab: Vocab

    @property
    def n_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def n_relations(self) -> int:
        return len(self.relation_vocab)

    def triples_from_tokens(self, rows) -> list[tuple[int, int, int]]:
        """Map token triples into this store's id space; unknown tokens become -1."""
        ev, rv = self.entity_vocab, self.relation_vocab
        return [(ev.get(h), rv.get(r), ev.get(t)) for h, r, t in rows]


def read_token_triples(path) -> list[tuple[str, str, str]]:
    """Parse a triple file into token triples without touching any vocabulary."""
    path = Path(path)
    rows: list[tuple[str, str, str]] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TripleFileError(
                    f"expected 3 tab-separated fields, got {len(parts)}",
                    path=path, line_no=line_no,
                )
            rows.append((parts[0], parts[1], parts[2]))
    if not rows:
        raise TripleFileError("file contains no triples", path=path)
    return rows


def load_triples(path) -> TripleStore:
    """Load a triple file, building entity/relation vocabularies in first-seen order.

    Duplicate triples are retained. Malformed lines raise TripleFileError with
    the 1-based line number; an empty file is also an error.
    """
    rows = read_token_triples(path)
    entity_vocab = Vocab()
    relation_vocab = Vocab()
    triples = []
    for h, r, t in rows:
        triples.append((entity_vocab.add(h), relation_vocab.add(r), entity_vocab.add(t)))
    return TripleStore(triples=triples, entity_vocab=entity_vocab, relation_vocab=relation_vocab)


@dataclass
class UndirectedGraph:
    """Simple 0/1 undirected graph: symmetric sparse adjacency plus degrees.

    Degrees are plain row sums of the adjacency, so a self-loop contributes 1.
    """

    n: int
    adjacency: sp.csr_matrix
    degrees: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges) -> "UndirectedGraph":
        """Build from an iterable of (u, v) pairs; (u, u) is a self-loop."""
        seen = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            seen.add((min(u, v), max(u, v)))
        # isolated nodes get a self-loop so the degree matrix stays invertible
        covered = {u for e in seen for u in e}
        for u in range(n):
            if u not in covered:
                seen.add((u, u))
        rows, cols = [], []
        for u, v in seen:
            rows.append(u)
            cols.append(v)
            if u != v:
                rows.append(v)
                cols.append(u)
        data = np.ones(len(rows), dtype=np.float64)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        degrees = np.asarray(adj.sum(axis=1)).ravel()
        return cls(n=n, adjacency=adj, degrees=degrees)

    def edge_list(self) -> list[tuple[int, int]]:
        """Sorted unique undirected edges, each once with u <= v."""
        coo = sp.triu(self.adjacency).tocoo()
        return sorted(zip(coo.row.tolist(), coo.col.tolist()))


def project_graph(store: TripleStore) -> UndirectedGraph:
    """Collapse a triple store onto a plain undirected simple graph.

    An edge {u, v} exists iff at least one triple relates u and v in either
    direction; parallel relations collapse to one unweighted edge. Reflexive
    triples keep their self-loop, and entities left edgeless get one so every
    degree is >= 1.
    """
    if not store.triples:
        raise ValueError("cannot project an empty triple store")
    n = store.n_entities
    edges = {(min(h, t), max(h, t)) for h, _, t in store.triples}
    return UndirectedGraph.from_edges(n, edges)


@dataclass
class NormalizedLaplacian:
    """Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2} (sparse)."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def normalized_laplacian(g: UndirectedGraph) -> NormalizedLaplacian:
    if np.any(g.degrees < 1):
        raise ValueError("graph has a zero-degree node; projection should prevent this")
    d_inv_sqrt = 1.0 / np.sqrt(g.degrees)
    D = sp.diags(d_inv_sqrt)
    lap = sp.identity(g.n, format="csr") - (D @ g.adjacency @ D).tocsr()
    return NormalizedLaplacian(matrix=lap.tocsr())


def save_edge_list(path, g: UndirectedGraph) -> None:
    """Persist as text: one header line "n m", then sorted "u v" lines."""
    edges = g.edge_list()
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{g.n} {len(edges)}\n")
        for u, v in edges:
            f.write(f"{u} {v}\n")


def load_edge_list(path) -> UndirectedGraph:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise TripleFileError("edge list header must be 'n m'", path=path, line_no=1)
        n, m = int(header[0]), int(header[1])
        edges = []
        for line_no, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise TripleFileError("edge line must be 'u v'", path=path, line_no=line_no)
            edges.append((int(parts[0]), int(parts[1])))
    if len(edges) != m:
        raise TripleFileError(f"header promised {m} edges, found {len(edges)}", path=path)
    return UndirectedGraph.from_edges(n, edges)
