import warnings

import numpy as np
import pytest

from hybrideval.clusterqual import LabeledPoints, silhouette
from hybrideval.projection import (
    EmbeddingSet,
    ProjectionSizingError,
    UmapParams,
    fit_ab,
    fuzzy_simplicial_set,
    knn_graph,
    umap_run,
)
from hybrideval.projection.umap import make_epochs_per_sample, membership_target

from conftest import two_blob_embedding


def embedding_of(vectors, seed=0):
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    rng = np.random.default_rng(seed)
    return EmbeddingSet(
        vectors=vectors,
        labels=rng.integers(0, 2, size=n),
        ids=tuple(f"p{i}" for i in range(n)),
    )


class TestKnnGraph:
    def test_collinear_hand_case(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 0.0]])
        knn = knn_graph(embedding_of(pts), 1)
        assert knn.indices[:, 0].tolist() == [1, 0, 1, 2]

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 5))
        knn = knn_graph(embedding_of(X), 5)
        for i in range(30):
            d = np.linalg.norm(X - X[i], axis=1)
            order = sorted((float(d[j]), j) for j in range(30) if j != i)[:5]
            assert knn.indices[i].tolist() == [j for _, j in order]
            assert np.allclose(knn.dists[i], [dj for dj, _ in order], atol=1e-12)

    def test_duplicates_at_zero_distance(self):
        pts = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0], [9.0, 9.0]])
        knn = knn_graph(embedding_of(pts), 1)
        assert knn.indices[0, 0] == 1
        assert knn.indices[1, 0] == 0
        assert knn.dists[0, 0] == 0.0

    def test_tie_broken_by_index(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [4.0, 0.0]])
        knn = knn_graph(embedding_of(pts), 2)
        assert knn.indices[0].tolist() == [1, 2]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            knn_graph(embedding_of(np.eye(4)), 4)


class TestFuzzySimplicialSet:
    def _graph(self, n=40, k=8, seed=2):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 6))
        emb = embedding_of(X)
        knn = knn_graph(emb, k)
        return knn, fuzzy_simplicial_set(knn, k)

    def test_nearest_neighbor_weight_one(self):
        knn, graph = self._graph()
        W = graph.weights
        # rho equals the NN distance, so the NN edge survives symmetrization at 1
        for i in range(W.shape[0]):
            assert W[i, knn.indices[i, 0]] == pytest.approx(1.0, abs=1e-12)

    def test_exactly_symmetric(self):
        _, graph = self._graph(seed=3)
        diff = graph.weights - graph.weights.T
        assert diff.nnz == 0 or np.abs(diff.data).max() == 0.0

    def test_weights_in_unit_interval(self):
        _, graph = self._graph(seed=4)
        assert np.all(graph.weights.data > 0.0)
        assert np.all(graph.weights.data <= 1.0 + 1e-12)

    def test_row_sums_hit_log2_k(self):
        k = 10
        knn, graph = self._graph(n=50, k=k, seed=5)
        vals = np.exp(-np.maximum(knn.dists - graph.rho[:, None], 0.0) / graph.sigma[:, None])
        sums = vals.sum(axis=1)
        assert np.abs(sums - np.log2(k)).max() < 1e-4
        assert graph.n_nonconverged == 0

    def test_duplicate_heavy_rows_flagged_not_fatal(self):
        # 12 coincident points: every neighbor sits at rho, the sum is pinned at k
        pts = np.vstack([np.zeros((12, 3)), np.eye(3) * 50.0])
        emb = embedding_of(pts)
        knn = knn_graph(emb, 11)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            graph = fuzzy_simplicial_set(knn, 11)
        assert graph.n_nonconverged > 0
        assert np.all(np.isfinite(graph.sigma))
        assert np.all(graph.sigma > 0.0)


class TestFitAb:
    def test_min_dist_01_matches_reference_values(self):
        a, b = fit_ab(0.1)
        assert a == pytest.approx(1.577, abs=2e-3)
        assert b == pytest.approx(0.895, abs=2e-3)

    def test_residual_of_fit(self):
        a, b = fit_ab(0.1)
        grid = np.linspace(0.0, 3.0, 300)
        fitted = 1.0 / (1.0 + a * grid ** (2.0 * b))
        rms = float(np.sqrt(np.mean((fitted - membership_target(grid, 0.1)) ** 2)))
        # the smooth family cannot erase the kink; optimum sits near 1.6e-2
        assert rms < 2.5e-2

    def test_curve_approaches_one_at_origin(self):
        a, b = fit_ab(0.1)
        assert 1.0 / (1.0 + a * 1e-9 ** (2 * b)) == pytest.approx(1.0, abs=1e-6)

    def test_larger_min_dist_smaller_a(self):
        a1, _ = fit_ab(0.1)
        a2, _ = fit_ab(0.5)
        assert a2 < a1

    def test_invalid_min_dist(self):
        with pytest.raises(ValueError):
            fit_ab(0.0)


class TestEpochsPerSample:
    def test_strongest_edge_sampled_every_epoch(self):
        eps = make_epochs_per_sample(np.array([1.0, 0.5, 0.25]), 100)
        assert eps[0] == pytest.approx(1.0)
        assert eps[1] == pytest.approx(2.0)
        assert eps[2] == pytest.approx(4.0)


class TestUmapRun:
    def test_deterministic_repeat(self):
        rng = np.random.default_rng(6)
        emb = embedding_of(rng.normal(size=(50, 6)))
        params = UmapParams(n_neighbors=8, n_epochs=60, seed=9)
        a = umap_run(emb, params)
        b = umap_run(emb, params)
        assert np.array_equal(a.coords, b.coords)
        assert np.array_equal(a.loss_trace, b.loss_trace)

    def test_two_blob_separation(self):
        vec, lab, ids = two_blob_embedding(n_per_blob=20, dim=16, seed=7)
        emb = EmbeddingSet(vec, lab, ids)
        res = umap_run(emb, UmapParams(n_neighbors=8, n_epochs=200, seed=2))
        _, sil = silhouette(LabeledPoints(res.coords, emb.labels))
        assert sil > 0.7

    def test_minimal_run_finite(self):
        rng = np.random.default_rng(8)
        emb = embedding_of(rng.normal(size=(5, 4)))
        res = umap_run(emb, UmapParams(n_neighbors=2, n_epochs=30, seed=0))
        assert res.coords.shape == (5, 2)
        assert np.all(np.isfinite(res.coords))
        assert len(res.loss_trace) == 30
        assert np.all(np.isfinite(res.loss_trace))

    def test_n_neighbors_too_large(self):
        rng = np.random.default_rng(9)
        emb = embedding_of(rng.normal(size=(10, 4)))
        with pytest.raises(ProjectionSizingError):
            umap_run(emb, UmapParams(n_neighbors=10))

    def test_seed_changes_layout(self):
        rng = np.random.default_rng(10)
        emb = embedding_of(rng.normal(size=(40, 5)))
        a = umap_run(emb, UmapParams(n_neighbors=6, n_epochs=40, seed=1))
        b = umap_run(emb, UmapParams(n_neighbors=6, n_epochs=40, seed=2))
        assert not np.array_equal(a.coords, b.coords)

    def test_fuzzy_graph_rotation_invariance(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(30, 6))
        Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        g1 = fuzzy_simplicial_set(knn_graph(embedding_of(X), 8), 8)
        g2 = fuzzy_simplicial_set(knn_graph(embedding_of(X @ Q.T), 8), 8)
        assert np.abs((g1.weights - g2.weights).toarray()).max() < 1e-9
