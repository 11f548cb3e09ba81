import numpy as np
import pytest

from hybrideval import dataspec


def make_pool(n_per_class, source, classes=dataspec.KNOWN_CLASSES, prefix=None):
    """Synthetic pool listing: no files on disk, just entries."""
    prefix = prefix or source
    entries = []
    for class_label in classes:
        for i in range(n_per_class):
            rel = f"{prefix}/{class_label}/{i:05d}.jpg"
            entries.append(
                dataspec.ImageEntry(id=rel, path=rel, class_label=class_label, source=source)
            )
    return entries


def make_distractor_pool(n, prefix="distractor"):
    return [
        dataspec.ImageEntry(
            id=f"{prefix}/{i:05d}.jpg",
            path=f"{prefix}/{i:05d}.jpg",
            class_label="unknown",
            source="distractor",
        )
        for i in range(n)
    ]


@pytest.fixture
def small_pools():
    """Pools sized for real_per_class=40 treatments (ratio up to 10)."""
    real = make_pool(60, "real")
    synth = make_pool(400, "synthetic", prefix="synth")
    distractor = make_distractor_pool(400)
    return real, synth, distractor


def two_blob_embedding(n_per_blob=200, dim=16, separation=10.0, seed=123):
    """Two Gaussian blobs `separation` sigmas apart (sigma = 1)."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, size=(n_per_blob, dim))
    b = rng.normal(0.0, 1.0, size=(n_per_blob, dim))
    b[:, 0] += separation
    vectors = np.vstack([a, b])
    labels = np.array([0] * n_per_blob + [1] * n_per_blob)
    ids = tuple(f"p{i}" for i in range(2 * n_per_blob))
    return vectors, labels, ids
