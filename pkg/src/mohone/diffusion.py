"""Heat diffusion over graphs at a chosen scale.

The central object is the column-normalized heat matrix: column j holds the
distribution of heat over all nodes after diffusing a unit source at node j
for time equal to the scale. Small scales see only local topology; large
scales see global structure. An exact eigendecomposition route serves small
graphs; a Chebyshev polynomial route costs O(degree * |edges|) per column and
needs no eigendecomposition.

exp(-s*L) with the symmetric normalized Laplacian is column-stochastic only
on regular graphs, so columns are explicitly clipped and renormalized before
any sampling use; the raw matrix is kept alongside for inspection.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import NormalizedLaplacian

DEFAULT_SCALE = 5.0
DEFAULT_CHEBYSHEV_DEGREE = 30
DEFAULT_CLIP_EPSILON = 1e-12
DEFAULT_SIGNATURE_BINS = 50
EXACT_NODE_CAP = 5000

_PSI_MAGIC = b"PSI1"


class NumericError(RuntimeError):
    """A numerical routine failed (eigendecomposition, vanished column, ...)."""


@dataclass
class HeatKernelConfig:
    scale: float = DEFAULT_SCALE
    method: str = "exact"  # "exact" | "chebyshev"
    chebyshev_degree: int = DEFAULT_CHEBYSHEV_DEGREE
    clip_epsilon: float = DEFAULT_CLIP_EPSILON

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale must be >= 0")
        if self.method not in ("exact", "chebyshev"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.chebyshev_degree < 1:
            raise ValueError("chebyshev_degree must be >= 1")
        if self.clip_epsilon < 0:
            raise ValueError("clip_epsilon must be >= 0")


@dataclass
class HeatDiffusionMatrix:
    """Column-normalized heat matrix plus the raw pre-normalization matrix.

    psi[:, j] is a probability distribution (entries >= 0, sums to 1). raw is
    None when the matrix was loaded from disk rather than computed.
    """

    psi: np.ndarray
    scale: float
    raw: np.ndarray | None = None
    raw_symmetric: bool | None = None

    @property
    def n(self) -> int:
        return self.psi.shape[0]


@dataclass
class HeatSignature:
    """Histogram of one node's heat column, over fixed bins on [0, 1]."""

    node: int
    histogram: np.ndarray


def _clip_and_normalize(raw: np.ndarray, clip_epsilon: float) -> np.ndarray:
    clipped = np.where(raw < clip_epsilon, 0.0, raw)
    colsums = clipped.sum(axis=0)
    if np.any(colsums <= 0):
        bad = int(np.argmin(colsums))
        raise NumericError(f"heat column {bad} vanished after clipping; clip_epsilon too large?")
    return clipped / colsums


def heat_matrix_exact(L: NormalizedLaplacian, s: float,
                      clip_epsilon: float = DEFAULT_CLIP_EPSILON,
                      max_nodes: int = EXACT_NODE_CAP) -> HeatDiffusionMatrix:
    """Dense-eigendecomposition heat matrix at scale s.

    Computes U diag(exp(-s*lambda)) U^T, clips entries below clip_epsilon to 0
    and renormalizes every column to sum 1.
    """
    if s < 0:
        raise ValueError("scale must be >= 0")
    n = L.n
    if n > max_nodes:
        raise ValueError(f"n={n} exceeds the exact-method cap {max_nodes}; use the chebyshev method")
    dense = L.matrix.toarray()
    try:
        evals, evecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as e:  # pragma: no cover - LAPACK failure is exotic
        raise NumericError(f"eigendecomposition failed: {e}") from e
    raw = (evecs * np.exp(-s * evals)) @ evecs.T
    raw_symmetric = bool(np.max(np.abs(raw - raw.T)) <= 1e-9)
    psi = _clip_and_normalize(raw, clip_epsilon)
    return HeatDiffusionMatrix(psi=psi, scale=s, raw=raw, raw_symmetric=raw_symmetric)


def estimate_lambda_max(L: NormalizedLaplacian, iters: int = 200, tol: float = 1e-13) -> float:
    """Upper estimate of the largest Laplacian eigenvalue.

    Power iteration with a fixed-seed start vector, inflated by a 1.01 safety
    factor and capped at the theoretical bound 2.
    """
    n = L.n
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    mat = L.matrix
    rayleigh = 0.0
    for _ in range(iters):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_rayleigh = float(v @ (mat @ v))
        if abs(new_rayleigh - rayleigh) <= tol * max(1.0, abs(new_rayleigh)):
            rayleigh = new_rayleigh
            break
        rayleigh = new_rayleigh
    return min(rayleigh * 1.01, 2.0)


def _chebyshev_coefficients(s: float, lam_max: float, degree: int) -> np.ndarray:
    """Chebyshev expansion coefficients of exp(-s*x) on [0, lam_max].

    Gauss-Chebyshev quadrature at degree+1 points; c[0] carries the usual
    half-weight convention.
    """
    npts = degree + 1
    theta = np.pi * (np.arange(npts) + 0.5) / npts
    a = lam_max / 2.0
    fvals = np.exp(-s * a * (np.cos(theta) + 1.0))
    k = np.arange(degree + 1)
    # (degree+1, npts) cosine design matrix
    cos_k = np.cos(np.outer(k, theta))
    return (2.0 / npts) * (cos_k @ fvals)


def heat_matrix_chebyshev(L: NormalizedLaplacian, s: float, K: int = DEFAULT_CHEBYSHEV_DEGREE,
                          clip_epsilon: float = DEFAULT_CLIP_EPSILON,
                          lam_max: float | None = None) -> HeatDiffusionMatrix:
    """Chebyshev-approximated heat matrix at scale s with a degree-K expansion.

    The expansion lives on [0, lam_max] (estimated when not given), applied
    through the three-term recurrence with sparse mat-vec products only, then
    clipped and column-normalized exactly like the exact route.
    """
    if s < 0:
        raise ValueError("scale must be >= 0")
    if K < 1:
        raise ValueError("Chebyshev degree must be >= 1")
    n = L.n
    if lam_max is None:
        lam_max = estimate_lambda_max(L)
    lam = max(lam_max, 1e-12)
    coeffs = _chebyshev_coefficients(s, lam, K)
    # shifted operator with spectrum mapped into [-1, 1]
    shifted = (2.0 / lam) * L.matrix - sp.identity(n, format="csr")
    t_prev = np.eye(n)
    t_cur = shifted @ t_prev
    acc = 0.5 * coeffs[0] * t_prev + coeffs[1] * t_cur
    for k in range(2, K + 1):
        t_next = 2.0 * (shifted @ t_cur) - t_prev
        acc += coeffs[k] * t_next
        t_prev, t_cur = t_cur, t_next
    raw = acc
    raw_symmetric = bool(np.max(np.abs(raw - raw.T)) <= 1e-9)
    psi = _clip_and_normalize(raw, clip_epsilon)
    return HeatDiffusionMatrix(psi=psi, scale=s, raw=raw, raw_symmetric=raw_symmetric)


def heat_column_chebyshev(L: NormalizedLaplacian, s: float, node: int,
                          K: int = DEFAULT_CHEBYSHEV_DEGREE,
                          clip_epsilon: float = DEFAULT_CLIP_EPSILON,
                          lam_max: float | None = None) -> np.ndarray:
    """Single normalized heat column, for graphs too large to materialize."""
    n = L.n
    if not 0 <= node < n:
        raise ValueError(f"node {node} out of range")
    if lam_max is None:
        lam_max = estimate_lambda_max(L)
    lam = max(lam_max, 1e-12)
    coeffs = _chebyshev_coefficients(s, lam, K)
    shifted = (2.0 / lam) * L.matrix - sp.identity(n, format="csr")
    t_prev = np.zeros(n)
    t_prev[node] = 1.0
    t_cur = shifted @ t_prev
    acc = 0.5 * coeffs[0] * t_prev + coeffs[1] * t_cur
    for k in range(2, K + 1):
        t_next = 2.0 * (shifted @ t_cur) - t_prev
        acc += coeffs[k] * t_next
        t_prev, t_cur = t_cur, t_next
    col = np.where(acc < clip_epsilon, 0.0, acc)
    total = col.sum()
    if total <= 0:
        raise NumericError(f"heat column {node} vanished after clipping")
    return col / total


def heat_matrix(L: NormalizedLaplacian, config: HeatKernelConfig) -> HeatDiffusionMatrix:
    if config.method == "exact":
        return heat_matrix_exact(L, config.scale, clip_epsilon=config.clip_epsilon)
    return heat_matrix_chebyshev(L, config.scale, K=config.chebyshev_degree,
                                 clip_epsilon=config.clip_epsilon)


def heat_signature(psi: HeatDiffusionMatrix, node: int,
                   bins: int = DEFAULT_SIGNATURE_BINS) -> HeatSignature:
    """Empirical distribution of one heat column over equal-width bins on [0, 1]."""
    if not 0 <= node < psi.n:
        raise ValueError(f"node {node} out of range")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    counts, _ = np.histogram(psi.psi[:, node], bins=bins, range=(0.0, 1.0))
    return HeatSignature(node=node, histogram=counts / psi.n)


def all_heat_signatures(psi: HeatDiffusionMatrix,
                        bins: int = DEFAULT_SIGNATURE_BINS) -> list[HeatSignature]:
    return [heat_signature(psi, u, bins=bins) for u in range(psi.n)]


def save_psi(path, m: HeatDiffusionMatrix) -> None:
    """Binary layout: magic "PSI1", u64 n, f64 scale, column-major float64 data."""
    with open(path, "wb") as f:
        f.write(_PSI_MAGIC)
        f.write(struct.pack("<Q", m.n))
        f.write(struct.pack("<d", m.scale))
        f.write(np.asfortranarray(m.psi, dtype=np.float64).tobytes(order="F"))


def load_psi(path) -> HeatDiffusionMatrix:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _PSI_MAGIC:
            raise ValueError(f"{path}: not a heat-matrix file (bad magic {magic!r})")
        (n,) = struct.unpack("<Q", f.read(8))
        (scale,) = struct.unpack("<d", f.read(8))
        data = np.frombuffer(f.read(8 * n * n), dtype=np.float64)
        if data.size != n * n:
            raise ValueError(f"{path}: truncated heat-matrix file")
        psi = data.reshape((n, n), order="F").copy()
    return HeatDiffusionMatrix(psi=psi, scale=scale)


def save_signatures(path, signatures: list[HeatSignature]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump([sig.histogram.tolist() for sig in signatures], f)


def load_signatures(path) -> list[HeatSignature]:
    with open(path, encoding="utf-8") as f:
        rows = json.load(f)
    return [HeatSignature(node=i, histogram=np.asarray(row, dtype=np.float64))
            for i, row in enumerate(rows)]
