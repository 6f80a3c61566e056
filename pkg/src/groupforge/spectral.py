"""Graph Laplacians, a Jacobi eigensolver, and Laplacian-eigenmap coordinates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MTooLarge, NoConvergence, NotSymmetric, WrongDimension
from .graph import WeightedGraph, degree_vector

JACOBI_TOL = 1e-12
MAX_SWEEPS = 100
ZERO_EIGENVALUE_TOL = 1e-9


class IsolatedVertexWarning(UserWarning):
    pass


class DisconnectedGraphWarning(UserWarning):
    pass


def laplacian(g: WeightedGraph) -> np.ndarray:
    """Combinatorial Laplacian D - W."""
    return np.diag(degree_vector(g)) - g.W


def normalized_laplacian(g: WeightedGraph) -> np.ndarray:
    """Symmetric normalized Laplacian D^-1/2 (D - W) D^-1/2.

    Rows and columns of degree-0 vertices are left at zero; an
    :class:`IsolatedVertexWarning` is emitted when any exist.
    """
    d = degree_vector(g)
    connected = d > 0
    if not connected.all():
        warnings.warn(
            f"{int((~connected).sum())} isolated vertex/vertices; their rows of the "
            "normalized Laplacian are zero", IsolatedVertexWarning, stacklevel=2)
    s = np.zeros_like(d)
    s[connected] = 1.0 / np.sqrt(d[connected])
    X = s[:, None] * g.W * s[None, :]
    X = 0.5 * (X + X.T)
    return np.diag(connected.astype(float)) - X


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def _round_robin(n):
    """Rounds of disjoint index pairs covering every pair exactly once (circle method)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
        if pairs:
            pairs.sort()
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _off_norm(A):
    off = A - np.diag(np.diag(A))
    return float(np.sqrt(np.sum(off * off)))


SIGN_TIE_TOL = 1e-9


def _fix_signs(V):
    A = np.abs(V)
    # magnitudes within SIGN_TIE_TOL of the column maximum count as tied;
    # argmax then returns the lowest tied index
    near = A >= A.max(axis=0) - SIGN_TIE_TOL
    idx = np.argmax(near, axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def symmetric_eigendecomposition(S, tol: float = JACOBI_TOL,
                                 max_sweeps: int = MAX_SWEEPS) -> EigenSystem:
    """Full eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Each sweep visits every off-diagonal pair once in a fixed round-robin
    order; pairs within a round are disjoint, so their rotations commute and
    are applied together. Iteration stops once the off-diagonal Frobenius
    norm is at most ``tol * ||S||_F``.

    Eigenvalues are returned ascending. Each eigenvector is signed so its
    largest-magnitude entry is positive (lowest index on ties).
    """
    A = np.array(S, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise NotSymmetric(f"expected a non-empty square matrix, got shape {A.shape}")
    n = A.shape[0]
    norm = float(np.linalg.norm(A))
    if np.max(np.abs(A - A.T), initial=0.0) > tol * max(norm, 1.0):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = tol * norm
    rounds = _round_robin(n)
    sweeps = 0
    while _off_norm(A) > target:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        for P, Q in rounds:
            apq = A[P, Q]
            active = apq != 0.0
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            app, aqq = A[P, P], A[Q, Q]
            with np.errstate(over="ignore", divide="ignore"):
                # a negligible apq gives theta = inf and hence no rotation
                theta = (aqq - app) / (2.0 * apq)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(1.0, theta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            Ap, Aq = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = c * Ap - s * Aq
            A[:, Q] = s * Ap + c * Aq
            Ap, Aq = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * Ap - s[:, None] * Aq
            A[Q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            Vp, Vq = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = c * Vp - s * Vq
            V[:, Q] = s * Vp + c * Vq
        sweeps += 1
    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return EigenSystem(values[order], _fix_signs(V[:, order]), sweeps)


@dataclass(frozen=True)
class SpectralEmbedding:
    """Spectral vectors for each vertex.

    Row ``m`` of ``Q`` is the spectral vector of student ``m``; column ``j``
    is the eigenvector with the ``j+1``-th smallest normalized-Laplacian
    eigenvalue (the smoothest eigenvector is dropped).
    """

    Q: np.ndarray
    retained_eigenvalues: np.ndarray
    eigenvalues: np.ndarray
    zero_eigenvalues: int = 1
    warnings: tuple = field(default=())

    @property
    def M(self):
        return self.Q.shape[1]

    @property
    def n(self):
        return self.Q.shape[0]

    def scaled(self, factor: float) -> "SpectralEmbedding":
        return SpectralEmbedding(self.Q * factor, self.retained_eigenvalues,
                                 self.eigenvalues, self.zero_eigenvalues, self.warnings)

    def subset(self, rows) -> "SpectralEmbedding":
        return SpectralEmbedding(self.Q[list(rows)], self.retained_eigenvalues,
                                 self.eigenvalues, self.zero_eigenvalues, self.warnings)


def embed(g: WeightedGraph, M: int = 3) -> SpectralEmbedding:
    n = g.n
    if not 1 <= M <= n - 1:
        raise MTooLarge(M, n)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        Ln = normalized_laplacian(g)
    notes.extend(str(w.message) for w in caught)
    es = symmetric_eigendecomposition(Ln)
    zeros = int(np.sum(es.values <= ZERO_EIGENVALUE_TOL))
    if zeros > 1:
        msg = (f"similarity graph is disconnected: eigenvalue 0 has multiplicity {zeros}; "
               "embedding coordinates mix component indicators")
        warnings.warn(msg, DisconnectedGraphWarning, stacklevel=2)
        notes.append(msg)
    return SpectralEmbedding(
        Q=es.vectors[:, 1:M + 1].copy(),
        retained_eigenvalues=es.values[1:M + 1].copy(),
        eigenvalues=es.values.copy(),
        zero_eigenvalues=zeros,
        warnings=tuple(notes),
    )


def embedding_to_rgb(e: SpectralEmbedding) -> list:
    """Per-column min/max rescale of 3-d spectral vectors to RGB in [0, 1]."""
    if e.M != 3:
        raise WrongDimension(f"RGB conversion needs M = 3, got M = {e.M}")
    lo = e.Q.min(axis=0)
    hi = e.Q.max(axis=0)
    span = hi - lo
    out = np.full(e.Q.shape, 0.5)
    ok = span > 0
    out[:, ok] = (e.Q[:, ok] - lo[ok]) / span[ok]
    return [tuple(float(x) for x in row) for row in out]
