import numpy as np
import pytest

from mohone.graph import UndirectedGraph


def erdos_renyi(n: int, p: float, seed: int) -> UndirectedGraph:
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return UndirectedGraph.from_edges(n, edges)


def complete_graph(n: int) -> UndirectedGraph:
    return UndirectedGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int) -> UndirectedGraph:
    return UndirectedGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> UndirectedGraph:
    return UndirectedGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def two_triangles() -> UndirectedGraph:
    """Two disconnected triangles: nodes 0-2 and 3-5."""
    return UndirectedGraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def bridged_clusters() -> tuple[UndirectedGraph, list, list]:
    """Two tight 4-node clusters joined by a 2-node path.

    Cluster A is the triangle {0,1,2} plus hub 3; cluster B is hub 6 plus the
    triangle {7,8,9}; path 3-4-5-6 bridges them. Returns (graph, A, B).
    """
    edges = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3),
             (3, 4), (4, 5), (5, 6),
             (6, 7), (6, 8), (6, 9), (7, 8), (7, 9), (8, 9)]
    return UndirectedGraph.from_edges(10, edges), [0, 1, 2, 3], [6, 7, 8, 9]


def barbell_graph(m1: int = 6, m2: int = 2) -> tuple[UndirectedGraph, np.ndarray]:
    """Two m1-cliques joined by an m2-node path; returns (graph, role labels).

    Roles: 0 = clique node off the path, 1 = clique node attached to the path,
    2 = path node. With m2 = 2 every role is an exact automorphism orbit.
    """
    edges = []
    for i in range(m1):
        for j in range(i + 1, m1):
            edges.append((i, j))
    off = m1 + m2
    for i in range(off, off + m1):
        for j in range(i + 1, off + m1):
            edges.append((i, j))
    edges.append((m1 - 1, m1))
    for i in range(m1, m1 + m2 - 1):
        edges.append((i, i + 1))
    edges.append((m1 + m2 - 1, off))
    n = 2 * m1 + m2
    labels = np.zeros(n, dtype=int)
    labels[m1 - 1] = 1
    labels[off] = 1
    labels[m1:m1 + m2] = 2
    return UndirectedGraph.from_edges(n, edges), labels


def write_triples(path, rows) -> str:
    with open(path, "w", encoding="utf-8") as f:
        for h, r, t in rows:
            f.write(f"{h}\t{r}\t{t}\n")
    return str(path)


@pytest.fixture
def toy_triples(tmp_path):
    rows = [("a", "likes", "b"), ("b", "likes", "c"), ("c", "made_of", "a"),
            ("a", "likes", "c"), ("d", "made_of", "d")]
    return write_triples(tmp_path / "toy.txt", rows)
