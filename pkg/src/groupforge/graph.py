"""Student similarity graph built from pairwise mark correlations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cohort import MarkMatrix
from .errors import LengthMismatch


def pearson_corr(r_m, r_n) -> float:
    """Pearson correlation of two mark vectors.

    Returns exactly 0.0 when either vector is constant; the result is
    clamped to [-1, 1].
    """
    x = np.asarray(r_m, dtype=float)
    y = np.asarray(r_n, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"vectors of shape {x.shape} and {y.shape}")
    if x.size < 2:
        raise LengthMismatch("correlation needs vectors of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _average_ranks(x):
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_corr(r_m, r_n) -> float:
    """Rank correlation (Pearson on average ranks)."""
    x = np.asarray(r_m, dtype=float)
    y = np.asarray(r_n, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"vectors of shape {x.shape} and {y.shape}")
    return pearson_corr(_average_ranks(x), _average_ranks(y))


CORRELATIONS = {"pearson": pearson_corr, "spearman": spearman_corr}


def correlation_matrix(marks: MarkMatrix, kind="pearson") -> np.ndarray:
    """Symmetric matrix of pairwise student correlations, unit diagonal."""
    corr = CORRELATIONS[kind]
    X = marks.marks
    n = X.shape[0]
    C = np.eye(n)
    for m in range(n):
        for k in range(m + 1, n):
            C[m, k] = C[k, m] = corr(X[m], X[k])
    return C


@dataclass(frozen=True)
class GraphParams:
    A: float = 10.0
    B: float = 0.5

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if not -1.0 <= self.B <= 1.0:
            raise ValueError(f"B must lie in [-1, 1], got {self.B}")


@dataclass(frozen=True)
class WeightedGraph:
    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float, copy=True)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {W.shape}")
        if not np.array_equal(W, W.T):
            raise ValueError("adjacency must be exactly symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if np.any(W < 0):
            raise ValueError("adjacency weights must be nonnegative")
        W.flags.writeable = False
        object.__setattr__(self, "W", W)

    @property
    def n(self):
        return self.W.shape[0]


def edge_weight(corr: float, params: GraphParams) -> float:
    """exp(corr**2 / A) when corr >= B, else 0."""
    if corr >= params.B:
        return math.exp(corr * corr / params.A)
    return 0.0


def build_similarity_graph(marks: MarkMatrix, params: GraphParams = GraphParams(),
                           kind="pearson") -> WeightedGraph:
    C = correlation_matrix(marks, kind)
    n = C.shape[0]
    W = np.zeros((n, n))
    for m in range(n):
        for k in range(m + 1, n):
            W[m, k] = W[k, m] = edge_weight(C[m, k], params)
    return WeightedGraph(W)


def degree_vector(g: WeightedGraph) -> np.ndarray:
    return g.W.sum(axis=1)
