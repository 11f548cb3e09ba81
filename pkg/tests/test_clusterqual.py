import numpy as np
import pytest

from hybrideval.clusterqual import (
    ClusterError,
    LabeledPoints,
    cluster_report,
    davies_bouldin,
    silhouette,
)


def silhouette_oracle(coords, labels):
    """Direct per-point evaluation of s(i) = (b - a) / max(a, b)."""
    n = len(coords)
    dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
    out = np.zeros(n)
    for i in range(n):
        own = labels[i]
        same = [j for j in range(n) if labels[j] == own and j != i]
        if not same:
            continue
        a = np.mean([dist[i, j] for j in same])
        b = min(
            np.mean([dist[i, j] for j in range(n) if labels[j] == c])
            for c in set(labels.tolist()) - {own}
        )
        denom = max(a, b)
        out[i] = 0.0 if denom == 0 else (b - a) / denom
    return out


def dbi_oracle(coords, labels):
    clusters = sorted(set(labels.tolist()))
    cents = {c: coords[labels == c].mean(axis=0) for c in clusters}
    sig = {
        c: np.mean(np.linalg.norm(coords[labels == c] - cents[c], axis=1))
        for c in clusters
    }
    total = 0.0
    for i in clusters:
        total += max(
            (sig[i] + sig[j]) / np.linalg.norm(cents[i] - cents[j])
            for j in clusters
            if j != i
        )
    return total / len(clusters)


TWO_CLUSTER_COORDS = np.array([[0.0, 0.0], [0.0, 1.0], [4.0, 4.0], [4.0, 5.0]])
TWO_CLUSTER_LABELS = np.array([0, 0, 1, 1])


class TestSilhouette:
    def test_two_cluster_fixture(self):
        points = LabeledPoints(TWO_CLUSTER_COORDS, TWO_CLUSTER_LABELS)
        per_point, mean = silhouette(points)
        assert mean == pytest.approx(0.823, abs=1e-3)
        assert np.allclose(per_point, silhouette_oracle(TWO_CLUSTER_COORDS, TWO_CLUSTER_LABELS))

    def test_separation_limit(self):
        # pushing the second cluster away drives s(i) toward 1
        means = []
        for gap in (5.0, 50.0, 500.0):
            coords = TWO_CLUSTER_COORDS.copy()
            coords[2:] += gap
            _, mean = silhouette(LabeledPoints(coords, TWO_CLUSTER_LABELS))
            means.append(mean)
        assert means[0] < means[1] < means[2]
        assert means[2] > 0.99

    def test_singleton_cluster_zero(self):
        coords = np.array([[0.0, 0.0], [0.0, 1.0], [9.0, 9.0]])
        labels = np.array([0, 0, 1])
        per_point, _ = silhouette(LabeledPoints(coords, labels))
        assert per_point[2] == 0.0

    def test_single_cluster_error(self):
        with pytest.raises(ClusterError):
            silhouette(LabeledPoints(TWO_CLUSTER_COORDS, np.zeros(4, dtype=int)))

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(8, 60))
            k = int(rng.integers(2, 5))
            coords = rng.normal(size=(n, 2)) + rng.integers(0, 8, size=(n, 1))
            labels = rng.integers(0, k, size=n)
            if len(set(labels.tolist())) < 2:
                continue
            per_point, mean = silhouette(LabeledPoints(coords, labels))
            want = silhouette_oracle(coords, labels)
            assert np.allclose(per_point, want, atol=1e-9)
            assert mean == pytest.approx(float(want.mean()), abs=1e-9)

    def test_range_bounds(self):
        rng = np.random.default_rng(6)
        coords = rng.normal(size=(40, 3))
        labels = rng.integers(0, 3, size=40)
        per_point, _ = silhouette(LabeledPoints(coords, labels))
        assert np.all(per_point >= -1.0) and np.all(per_point <= 1.0)


class TestDaviesBouldin:
    def test_two_cluster_fixture(self):
        points = LabeledPoints(TWO_CLUSTER_COORDS, TWO_CLUSTER_LABELS)
        assert davies_bouldin(points) == pytest.approx(0.1768, abs=1e-3)

    def test_scaling_of_separation(self):
        base = davies_bouldin(LabeledPoints(TWO_CLUSTER_COORDS, TWO_CLUSTER_LABELS))
        # translate the second cluster 10x farther without reshaping it
        coords = TWO_CLUSTER_COORDS.copy()
        coords[2:] += 9.0 * np.array([4.0, 4.0])
        far = davies_bouldin(LabeledPoints(coords, TWO_CLUSTER_LABELS))
        assert far == pytest.approx(base / 10, rel=1e-9)

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(10, 80))
            k = int(rng.integers(2, 5))
            coords = rng.normal(size=(n, 3)) * 0.5
            labels = rng.integers(0, k, size=n)
            coords[:, 0] += labels * 4.0
            if len(set(labels.tolist())) < 2:
                continue
            got = davies_bouldin(LabeledPoints(coords, labels))
            assert got == pytest.approx(dbi_oracle(coords, labels), abs=1e-9)

    def test_coincident_centroids_error(self):
        coords = np.array([[0.0, 0.0], [2.0, 2.0], [0.0, 2.0], [2.0, 0.0]])
        labels = np.array([0, 0, 1, 1])
        with pytest.raises(ClusterError, match="coincident"):
            davies_bouldin(LabeledPoints(coords, labels))


class TestInvariances:
    @staticmethod
    def _rotation(theta):
        return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(10)
        coords = rng.normal(size=(50, 2))
        labels = rng.integers(0, 3, size=50)
        moved = coords @ self._rotation(0.7).T + np.array([3.5, -2.0])
        _, s0 = silhouette(LabeledPoints(coords, labels))
        _, s1 = silhouette(LabeledPoints(moved, labels))
        assert s1 == pytest.approx(s0, abs=1e-9)
        assert davies_bouldin(LabeledPoints(moved, labels)) == pytest.approx(
            davies_bouldin(LabeledPoints(coords, labels)), abs=1e-9
        )

    def test_uniform_scaling_invariance(self):
        rng = np.random.default_rng(11)
        coords = rng.normal(size=(40, 2))
        labels = rng.integers(0, 2, size=40)
        coords[:, 0] += labels * 5
        _, s0 = silhouette(LabeledPoints(coords, labels))
        _, s1 = silhouette(LabeledPoints(coords * 37.0, labels))
        assert s1 == pytest.approx(s0, abs=1e-9)
        assert davies_bouldin(LabeledPoints(coords * 37.0, labels)) == pytest.approx(
            davies_bouldin(LabeledPoints(coords, labels)), abs=1e-9
        )

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(12)
        coords = rng.normal(size=(30, 2))
        labels = rng.integers(0, 3, size=30)
        coords[:, 0] += labels * 4
        perm = {0: 2, 1: 0, 2: 1}
        relabeled = np.array([perm[l] for l in labels.tolist()])
        _, s0 = silhouette(LabeledPoints(coords, labels))
        _, s1 = silhouette(LabeledPoints(coords, relabeled))
        assert s1 == pytest.approx(s0, abs=1e-12)
        assert davies_bouldin(LabeledPoints(coords, relabeled)) == pytest.approx(
            davies_bouldin(LabeledPoints(coords, labels)), abs=1e-12
        )

    def test_tighter_farther_scores_better(self):
        rng = np.random.default_rng(13)
        sil_scores, dbi_scores = [], []
        for separation in (1.0, 3.0, 8.0):
            a = rng.normal(0, 1, size=(40, 2))
            b = rng.normal(0, 1, size=(40, 2)) + [separation, 0.0]
            coords = np.vstack([a, b])
            labels = np.array([0] * 40 + [1] * 40)
            _, s = silhouette(LabeledPoints(coords, labels))
            sil_scores.append(s)
            dbi_scores.append(davies_bouldin(LabeledPoints(coords, labels)))
        assert sil_scores[0] < sil_scores[1] < sil_scores[2]
        assert dbi_scores[0] > dbi_scores[1] > dbi_scores[2]


class TestClusterReport:
    def test_report_consistency(self):
        points = LabeledPoints(TWO_CLUSTER_COORDS, TWO_CLUSTER_LABELS)
        rep = cluster_report(points)
        assert rep.silhouette_mean == pytest.approx(float(rep.per_point_silhouette.mean()))
        assert rep.per_cluster_dispersion[0] == pytest.approx(0.5)
        assert rep.per_cluster_dispersion[1] == pytest.approx(0.5)
        assert rep.dbi == pytest.approx(0.1768, abs=1e-3)
