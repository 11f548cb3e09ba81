"""Cluster validity indices over labeled point sets: Silhouette and Davies-Bouldin.

Both use Euclidean distance. Silhouette assigns 0 to singleton-cluster
points; Davies-Bouldin dispersion is the mean distance of a cluster's points
to its centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class ClusterError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledPoints:
    coords: np.ndarray  # N x m
    labels: np.ndarray  # N class indices

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if coords.ndim != 2:
            raise ClusterError("coords must be an N x m matrix")
        if labels.shape != (coords.shape[0],):
            raise ClusterError("labels must align with coords rows")
        if not np.all(np.isfinite(coords)):
            raise ClusterError("coords must be finite")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class ClusterReport:
    silhouette_mean: float
    dbi: float
    per_point_silhouette: np.ndarray
    per_cluster_dispersion: dict


def _compact_labels(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, compact = np.unique(labels, return_inverse=True)
    return uniq, compact.astype(np.int64)


def silhouette(points: LabeledPoints) -> tuple[np.ndarray, float]:
    """Per-point silhouette values and their mean.

    s(i) = (b(i) - a(i)) / max(a(i), b(i)) with a(i) the mean intra-cluster
    distance (self excluded) and b(i) the best mean distance to another
    cluster. Requires at least two clusters.
    """
    uniq, labels = _compact_labels(points.labels)
    if len(uniq) < 2:
        raise ClusterError("silhouette needs at least 2 clusters")
    dist = np.sqrt(kernels.pairwise_sq_dists(points.coords))
    per_point = np.asarray(kernels.silhouette_samples(dist, labels, len(uniq)))
    return per_point, float(per_point.mean())


def davies_bouldin(points: LabeledPoints) -> float:
    """Mean over clusters of the worst (sigma_i + sigma_j) / d_ij ratio."""
    uniq, labels = _compact_labels(points.labels)
    n_clusters = len(uniq)
    if n_clusters < 2:
        raise ClusterError("Davies-Bouldin needs at least 2 clusters")
    coords = points.coords
    centroids = np.stack([coords[labels == c].mean(axis=0) for c in range(n_clusters)])
    sigma = np.array(
        [
            float(np.mean(np.linalg.norm(coords[labels == c] - centroids[c], axis=1)))
            for c in range(n_clusters)
        ]
    )
    total = 0.0
    for i in range(n_clusters):
        worst = 0.0
        for j in range(n_clusters):
            if i == j:
                continue
            d_ij = float(np.linalg.norm(centroids[i] - centroids[j]))
            if d_ij == 0.0:
                raise ClusterError(
                    f"clusters {uniq[i]} and {uniq[j]} have coincident centroids"
                )
            worst = max(worst, (sigma[i] + sigma[j]) / d_ij)
        total += worst
    return total / n_clusters


def cluster_report(points: LabeledPoints) -> ClusterReport:
    uniq, labels = _compact_labels(points.labels)
    per_point, mean = silhouette(points)
    dbi = davies_bouldin(points)
    dispersion = {}
    for c, original in enumerate(uniq):
        members = points.coords[labels == c]
        centroid = members.mean(axis=0)
        dispersion[int(original)] = float(np.mean(np.linalg.norm(members - centroid, axis=1)))
    return ClusterReport(
        silhouette_mean=mean,
        dbi=dbi,
        per_point_silhouette=per_point,
        per_cluster_dispersion=dispersion,
    )
