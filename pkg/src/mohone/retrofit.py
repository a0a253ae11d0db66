"""Infuse base entity embeddings with network-embedding neighborhoods.

A convex least-squares objective balances staying close to the original
entity vectors against moving toward each entity's nearest neighbors in the
network embedding space. Coordinate updates have a closed form, applied as
in-place Gauss-Seidel sweeps in ascending entity order; the sweep order is
part of the contract so runs are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_NEIGHBORS = 10
DEFAULT_ALPHA = 1.0
DEFAULT_MAX_ITERS = 10
DEFAULT_TOL = 1e-3


@dataclass
class RetrofitProblem:
    """Base matrix, per-entity neighbor lists (j, beta), prior weights alpha."""

    Q_hat: np.ndarray
    neighbor_sets: list
    alpha: np.ndarray
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    _nb_idx: list = field(init=False, repr=False)
    _nb_beta: list = field(init=False, repr=False)

    def __post_init__(self):
        self.Q_hat = np.asarray(self.Q_hat, dtype=np.float64)
        n = self.Q_hat.shape[0]
        if len(self.neighbor_sets) != n:
            raise ValueError("neighbor_sets length must match entity count")
        self.alpha = np.broadcast_to(np.asarray(self.alpha, dtype=np.float64), (n,)).copy()
        if np.any(self.alpha <= 0):
            raise ValueError("all alpha must be strictly positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        self._nb_idx = []
        self._nb_beta = []
        for i, pairs in enumerate(self.neighbor_sets):
            idx = np.array([j for j, _ in pairs], dtype=np.int64)
            beta = np.array([b for _, b in pairs], dtype=np.float64)
            if np.any(beta < 0):
                raise ValueError(f"negative beta in neighbor set of entity {i}")
            if np.any(idx == i):
                raise ValueError(f"entity {i} lists itself as a neighbor")
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"neighbor id out of range for entity {i}")
            self._nb_idx.append(idx)
            self._nb_beta.append(beta)

    @property
    def n(self) -> int:
        return self.Q_hat.shape[0]


def build_neighbor_sets(F, k: int) -> list:
    """k nearest neighbors per row of F by cosine similarity, beta = 1/k.

    Ties break toward the lowest index. All-zero rows are treated as
    orthogonal to everything.
    """
    X = np.asarray(getattr(F, "matrix", F), dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n (k={k}, n={n})")
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    unit = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    sims = unit @ unit.T
    np.fill_diagonal(sims, -np.inf)
    beta = 1.0 / k
    sets = []
    for i in range(n):
        nearest = np.argsort(-sims[i], kind="stable")[:k]
        sets.append([(int(j), beta) for j in nearest])
    return sets


def retrofit_objective(problem: RetrofitProblem, Q: np.ndarray) -> float:
    """Prior term plus neighbor-attraction term, both squared Euclidean."""
    Q = np.asarray(Q, dtype=np.float64)
    diff = Q - problem.Q_hat
    total = float(np.sum(problem.alpha * np.sum(diff * diff, axis=1)))
    for i in range(problem.n):
        idx = problem._nb_idx[i]
        if idx.size == 0:
            continue
        d = Q[i] - Q[idx]
        total += float(problem._nb_beta[i] @ np.sum(d * d, axis=1))
    return total


def retrofit_step(problem: RetrofitProblem, Q: np.ndarray) -> np.ndarray:
    """One Gauss-Seidel sweep in ascending entity order; returns a new matrix.

    Each row is replaced by the closed-form minimizer of its own terms, using
    rows already updated earlier in the sweep.
    """
    Qn = np.array(Q, dtype=np.float64, copy=True)
    for i in range(problem.n):
        idx = problem._nb_idx[i]
        if idx.size == 0:
            Qn[i] = problem.Q_hat[i]
            continue
        beta = problem._nb_beta[i]
        denom = problem.alpha[i] + beta.sum()
        if denom <= 0:
            raise RuntimeError(f"zero update denominator at entity {i}; alpha must keep this positive")
        Qn[i] = (beta @ Qn[idx] + problem.alpha[i] * problem.Q_hat[i]) / denom
    return Qn


def jacobi_step(problem: RetrofitProblem, Q: np.ndarray) -> np.ndarray:
    """One Jacobi sweep: every row updates from the previous iterate only.

    Row updates are independent, so this variant parallelizes trivially; it
    converges to the same fixed point (the system is strictly diagonally
    dominant) but takes more sweeps than Gauss-Seidel and is excluded from
    the determinism contract.
    """
    Qn = np.empty_like(np.asarray(Q, dtype=np.float64))
    for i in range(problem.n):
        idx = problem._nb_idx[i]
        if idx.size == 0:
            Qn[i] = problem.Q_hat[i]
            continue
        beta = problem._nb_beta[i]
        denom = problem.alpha[i] + beta.sum()
        Qn[i] = (beta @ Q[idx] + problem.alpha[i] * problem.Q_hat[i]) / denom
    return Qn


@dataclass
class RetrofitResult:
    Q: np.ndarray
    history: list  # per sweep: {"iter", "theta", "max_row_delta"}

    @property
    def iterations(self) -> int:
        return len(self.history)


def retrofit(problem: RetrofitProblem, method: str = "gauss-seidel") -> RetrofitResult:
    """Run sweeps from Q = Q_hat until the max relative row change drops
    below tol or max_iters sweeps have run; records objective per sweep."""
    if method not in ("gauss-seidel", "jacobi"):
        raise ValueError(f"method must be 'gauss-seidel' or 'jacobi', got {method!r}")
    step = retrofit_step if method == "gauss-seidel" else jacobi_step
    Q = problem.Q_hat.copy()
    history = []
    for it in range(1, problem.max_iters + 1):
        Qn = step(problem, Q)
        row_delta = np.linalg.norm(Qn - Q, axis=1)
        row_scale = np.maximum(np.linalg.norm(Q, axis=1), 1e-12)
        max_rel = float(np.max(row_delta / row_scale)) if problem.n else 0.0
        theta = retrofit_objective(problem, Qn)
        history.append({"iter": it, "theta": theta, "max_row_delta": max_rel})
        Q = Qn
        if max_rel < problem.tol:
            break
    return RetrofitResult(Q=Q, history=history)
