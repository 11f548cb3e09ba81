"""hybrideval: ratio-controlled real/synthetic dataset treatments, classifier
metrics, from-scratch t-SNE/UMAP projections, cluster validity indices, and
deterministic SVG/markdown reports."""

__version__ = "0.1.0"
