"""Shared projection types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ProjectionSizingError(ValueError):
    """Parameters are infeasible for the input size; raised before any compute."""


@dataclass(frozen=True)
class EmbeddingSet:
    vectors: np.ndarray  # N x d
    labels: np.ndarray  # N class indices
    ids: tuple[str, ...]

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be an N x d matrix")
        n, d = vectors.shape
        if n < 4:
            raise ValueError("projection needs at least 4 points")
        if d < 2:
            raise ValueError("embedding dimension must be >= 2")
        if not np.all(np.isfinite(vectors)):
            bad = int(np.where(~np.isfinite(vectors).all(axis=1))[0][0])
            raise ValueError(f"non-finite embedding vector at row {bad}")
        if labels.shape != (n,):
            raise ValueError("labels must align with vectors rows")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != n:
            raise ValueError("ids must align with vectors rows")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class ProjectionResult:
    coords: np.ndarray  # N x out_dims
    loss_trace: np.ndarray
    params_echo: dict
    seed: int
    diagnostics: dict = field(default_factory=dict)

    def final_loss(self) -> float:
        return float(self.loss_trace[-1])
