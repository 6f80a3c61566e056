import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groupforge import (
    SpectralEmbedding,
    WeightedGraph,
    build_similarity_graph,
    embed,
    embedding_to_rgb,
    laplacian,
    normalized_laplacian,
    symmetric_eigendecomposition,
    synth_cohort,
    three_affinity_specs,
)
from groupforge.errors import MTooLarge, NoConvergence, NotSymmetric, WrongDimension
from groupforge.spectral import DisconnectedGraphWarning, IsolatedVertexWarning

K3 = WeightedGraph(np.ones((3, 3)) - np.eye(3))


def path_graph(n):
    W = np.zeros((n, n))
    for i in range(n - 1):
        W[i, i + 1] = W[i + 1, i] = 1.0
    return WeightedGraph(W)


def test_laplacian_examples():
    assert laplacian(WeightedGraph([[0, 1], [1, 0]])).tolist() == [[1, -1], [-1, 1]]
    assert not laplacian(WeightedGraph(np.zeros((3, 3)))).any()
    L = laplacian(K3)
    assert np.array_equal(np.diag(L), [2, 2, 2])
    assert L[0, 1] == L[1, 2] == L[0, 2] == -1
    assert symmetric_eigendecomposition(L).values == pytest.approx([0, 3, 3], abs=1e-12)


def test_normalized_laplacian_k3():
    Ln = normalized_laplacian(K3)
    assert np.diag(Ln) == pytest.approx([1, 1, 1])
    assert Ln[0, 1] == pytest.approx(-0.5)
    assert symmetric_eigendecomposition(Ln).values == pytest.approx([0, 1.5, 1.5], abs=1e-12)


@pytest.mark.parametrize("w", [0.01, 1.0, 7.5])
def test_normalized_single_edge_spectrum(w):
    Ln = normalized_laplacian(WeightedGraph([[0, w], [w, 0]]))
    assert symmetric_eigendecomposition(Ln).values == pytest.approx([0, 2], abs=1e-12)


def test_isolated_vertex_row_is_zero():
    W = np.zeros((3, 3))
    W[0, 1] = W[1, 0] = 1.0
    with pytest.warns(IsolatedVertexWarning):
        Ln = normalized_laplacian(WeightedGraph(W))
    assert not Ln[2].any() and not Ln[:, 2].any()
    vals = symmetric_eigendecomposition(Ln).values
    assert vals == pytest.approx([0, 0, 2], abs=1e-12)


def test_eig_identity():
    es = symmetric_eigendecomposition(np.eye(3))
    assert es.values.tolist() == [1, 1, 1]
    assert np.array_equal(es.vectors, np.eye(3))


def test_eig_2x2_closed_form():
    es = symmetric_eigendecomposition([[1, -1], [-1, 1]])
    assert es.values == pytest.approx([0, 2], abs=1e-15)
    r = 1 / math.sqrt(2)
    assert es.vectors[:, 0] == pytest.approx([r, r])
    # largest-magnitude entry is tied; the first one is made positive
    assert es.vectors[:, 1] == pytest.approx([r, -r])


def test_eig_diagonal():
    es = symmetric_eigendecomposition(np.diag([3.0, 1.0, 2.0]))
    assert es.values.tolist() == [1, 2, 3]
    assert np.array_equal(np.abs(es.vectors), np.eye(3)[:, [1, 2, 0]])


def test_eig_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        symmetric_eigendecomposition([[1, 2], [0, 1]])


def test_eig_sweep_limit():
    S = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    with pytest.raises(NoConvergence):
        symmetric_eigendecomposition(S, max_sweeps=1)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)).map(
    lambda t: (t[0], t[0])), elements=st.floats(-50, 50)))
def test_eig_reconstruction_and_orthonormality(X):
    S = X + X.T
    es = symmetric_eigendecomposition(S)
    U, lam = es.vectors, es.values
    norm = np.linalg.norm(S)
    assert np.all(np.diff(lam) >= 0)
    assert np.linalg.norm(S - U @ np.diag(lam) @ U.T) <= 1e-8 * max(norm, 1e-300) + 1e-300
    assert np.abs(U.T @ U - np.eye(len(S))).max() <= 1e-10
    for i in range(len(S)):
        assert np.linalg.norm(S @ U[:, i] - lam[i] * U[:, i]) <= 1e-10 * max(norm, 1.0)


def test_eig_matches_independent_solver(rng):
    X = rng.standard_normal((15, 15))
    S = X + X.T
    assert symmetric_eigendecomposition(S).values == pytest.approx(
        np.linalg.eigvalsh(S), abs=1e-10)


def test_sign_convention_is_deterministic(rng):
    X = rng.standard_normal((8, 8))
    S = X + X.T
    V = symmetric_eigendecomposition(S).vectors
    for j in range(8):
        mags = np.abs(V[:, j])
        i = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
        assert V[i, j] > 0
    assert np.array_equal(V, symmetric_eigendecomposition(S).vectors)


def test_embed_default_dimension():
    mm, _ = synth_cohort(three_affinity_specs(6), 23, 3)
    e = embed(build_similarity_graph(mm))
    assert e.Q.shape == (18, 3) and e.M == 3


def test_embed_excludes_smoothest_vector():
    W = np.array([[0, 1, 2, 0], [1, 0, 1, 1], [2, 1, 0, 3], [0, 1, 3, 0]], dtype=float)
    g = WeightedGraph(W)
    e = embed(g, 3)
    d = W.sum(axis=1)
    u0 = np.sqrt(d) / np.linalg.norm(np.sqrt(d))
    assert np.abs(e.Q.T @ u0).max() < 1e-10
    assert e.eigenvalues[0] == pytest.approx(0, abs=1e-12)
    assert np.linalg.norm(e.Q, axis=0) == pytest.approx([1, 1, 1])


def test_embed_path_graph_against_numpy():
    g = path_graph(4)
    e = embed(g, 1)
    lam, U = np.linalg.eigh(normalized_laplacian(g))
    fiedler = U[:, 1]
    # antisymmetric vector: entries 0 and 3 tie in magnitude, the first wins
    mags = np.abs(fiedler)
    i = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
    fiedler = fiedler * np.sign(fiedler[i])
    assert e.Q[:, 0] == pytest.approx(fiedler, abs=1e-10)
    assert e.retained_eigenvalues == pytest.approx([lam[1]])


def test_embed_dimension_limits():
    with pytest.raises(MTooLarge):
        embed(path_graph(4), 4)
    with pytest.raises(MTooLarge):
        embed(path_graph(4), 0)


def test_embed_disconnected_warns():
    W = np.zeros((4, 4))
    W[0, 1] = W[1, 0] = W[2, 3] = W[3, 2] = 1.0
    with pytest.warns(DisconnectedGraphWarning):
        e = embed(WeightedGraph(W), 2)
    assert e.zero_eigenvalues == 2
    assert e.warnings


def test_locality_identical_marks_identical_rows():
    rng = np.random.default_rng(4)
    specs = [(4, rng.uniform(20, 90, 12), 0.0) for _ in range(6)]
    mm, labels = synth_cohort(specs, 12, seed=0)
    g = build_similarity_graph(mm)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = embed(g, 3)
    for m in range(mm.n):
        for k in range(mm.n):
            if np.array_equal(mm.marks[m], mm.marks[k]):
                assert np.abs(e.Q[m] - e.Q[k]).max() <= 1e-8


def _emb(Q):
    Q = np.asarray(Q, dtype=float)
    return SpectralEmbedding(Q, np.zeros(Q.shape[1]), np.zeros(Q.shape[0]))


def test_rgb_extremes_and_constant_column():
    rgb = embedding_to_rgb(_emb([[0, 1, 5], [2, 3, 5], [1, 2, 5]]))
    assert rgb[0] == (0.0, 0.0, 0.5)
    assert rgb[1] == (1.0, 1.0, 0.5)
    assert rgb[2] == (0.5, 0.5, 0.5)


def test_rgb_needs_three_dimensions():
    with pytest.raises(WrongDimension):
        embedding_to_rgb(_emb([[0, 1], [1, 0]]))
