"""Text embedding files and artifact sidecars.

The embedding format is word2vec-text: a header line "n d", then one line per
row "token f1 ... fd", space-separated. Floats are written with shortest
round-trip repr so a save/load cycle is lossless, which the stage-composition
determinism contract relies on. The same format is the input contract for
externally produced embeddings.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

RELATION_PREFIX = "rel:"


def save_vectors(path, tokens, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or len(tokens) != matrix.shape[0]:
        raise ValueError("tokens and matrix rows must align")
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for tok, row in zip(tokens, matrix):
            if any(ch.isspace() for ch in tok):
                raise ValueError(f"token {tok!r} contains whitespace")
            f.write(tok + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_vectors(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: embedding header must be 'n d'")
        n, d = int(header[0]), int(header[1])
        tokens: list[str] = []
        matrix = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            parts = f.readline().split()
            if len(parts) != d + 1:
                raise ValueError(f"{path}: row {i} has {len(parts) - 1} values, expected {d}")
            tokens.append(parts[0])
            matrix[i] = [float(x) for x in parts[1:]]
    return tokens, matrix


def config_hash(obj) -> str:
    """Stable hash of any JSON-serializable configuration object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def vocab_hash(entity_tokens, relation_tokens=()) -> str:
    h = hashlib.sha256()
    for tok in entity_tokens:
        h.update(tok.encode("utf-8") + b"\x00")
    h.update(b"\x01")
    for tok in relation_tokens:
        h.update(tok.encode("utf-8") + b"\x00")
    return h.hexdigest()[:16]


def sidecar_path(artifact_path) -> Path:
    return Path(str(artifact_path) + ".json")


def write_sidecar(artifact_path, payload: dict) -> None:
    with open(sidecar_path(artifact_path), "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_sidecar(artifact_path) -> dict:
    with open(sidecar_path(artifact_path), encoding="utf-8") as f:
        return json.load(f)
