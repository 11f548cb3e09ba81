"""From-scratch 2D projections of embedding sets: exact t-SNE and UMAP."""

from ._types import EmbeddingSet, ProjectionResult, ProjectionSizingError
from .tsne import (
    TsneParams,
    low_dim_affinities,
    pairwise_sq_dists,
    perplexity_calibration,
    tsne_gradient,
    tsne_run,
)
from .umap import FuzzyGraph, UmapParams, fit_ab, fuzzy_simplicial_set, knn_graph, umap_run
from .io import (
    read_embeddings,
    read_projection,
    write_embeddings,
    write_projection,
    InterchangeError,
)

__all__ = [
    "EmbeddingSet",
    "ProjectionResult",
    "ProjectionSizingError",
    "TsneParams",
    "UmapParams",
    "FuzzyGraph",
    "pairwise_sq_dists",
    "perplexity_calibration",
    "low_dim_affinities",
    "tsne_gradient",
    "tsne_run",
    "knn_graph",
    "fuzzy_simplicial_set",
    "fit_ab",
    "umap_run",
    "read_embeddings",
    "write_embeddings",
    "read_projection",
    "write_projection",
    "InterchangeError",
]
