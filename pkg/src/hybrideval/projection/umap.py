"""From-scratch UMAP: fuzzy simplicial set, spectral init, negative-sampling SGD.

The high-dimensional graph comes from an exact k-NN scan: per point, rho is
the distance to the nearest neighbor and sigma is solved by bisection so the
smoothed weights sum to log2(k); the graph is symmetrized with the
probabilistic t-conorm a + b - a*b. Low-dimensional attraction/repulsion
follows the fitted 1/(1 + a d^(2b)) curve for the requested min_dist.
Deterministic for a given seed, including the in-kernel negative sampler.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .. import kernels
from .._accel import backend_name
from ..kernels._umap_sgd import seed_rng_state
from ._types import EmbeddingSet, ProjectionResult, ProjectionSizingError

SMOOTH_KNN_TOL = 1e-5
SMOOTH_KNN_ITERS = 64
# least-squares fit of 1/(1 + a d^(2b)) for min_dist=0.1, spread=1
FALLBACK_AB_MIN_DIST_01 = (1.5769434603113077, 0.8950608781227859)


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 15
    min_dist: float = 0.1
    out_dims: int = 2
    n_epochs: int = 500
    negative_samples: int = 5
    learning_rate: float = 1.0
    repulsion_strength: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if self.min_dist <= 0:
            raise ValueError("min_dist must be positive")
        if self.out_dims not in (2, 3):
            raise ValueError("out_dims must be 2 or 3")
        if self.n_epochs < 1 or self.negative_samples < 1:
            raise ValueError("n_epochs and negative_samples must be positive")


class NeighborGraph(NamedTuple):
    indices: np.ndarray  # N x k neighbor indices, ascending distance
    dists: np.ndarray  # N x k Euclidean distances


class FuzzyGraph(NamedTuple):
    weights: sp.csr_matrix  # symmetric, entries in (0, 1]
    rho: np.ndarray
    sigma: np.ndarray
    n_nonconverged: int


def knn_graph(emb: EmbeddingSet, k: int) -> NeighborGraph:
    """Exact k nearest neighbors by Euclidean distance, ties broken by index."""
    n = emb.n
    if k >= n:
        raise ValueError(f"k={k} must be smaller than N={n}")
    D = kernels.pairwise_sq_dists(emb.vectors)
    np.fill_diagonal(D, np.inf)
    # stable sort keeps index order among exact ties
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    dists = np.sqrt(np.take_along_axis(D, order, axis=1))
    return NeighborGraph(indices=order.astype(np.int64), dists=dists)


def fuzzy_simplicial_set(knn: NeighborGraph, n_neighbors: int) -> FuzzyGraph:
    """Smooth the k-NN graph into a symmetric fuzzy weight matrix."""
    n, k = knn.dists.shape
    target = float(np.log2(n_neighbors))
    sigma, rho, converged = kernels.smooth_knn(
        np.ascontiguousarray(knn.dists), target, SMOOTH_KNN_TOL, SMOOTH_KNN_ITERS
    )
    n_bad = int(np.sum(~np.asarray(converged)))
    if n_bad:
        warnings.warn(
            f"smooth-knn bisection failed on {n_bad} points; sigma clamped",
            RuntimeWarning,
            stacklevel=2,
        )

    vals = np.exp(-np.maximum(knn.dists - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(n), k)
    A = sp.csr_matrix((vals.ravel(), (rows, knn.indices.ravel())), shape=(n, n))
    # probabilistic t-conorm: w = a + b - a*b
    W = (A + A.T) - A.multiply(A.T)
    W = W.tocsr()
    W.sort_indices()

    isolated = np.where(np.diff(W.indptr) == 0)[0]
    if isolated.size:
        warnings.warn(
            f"{isolated.size} isolated points reconnected to their nearest neighbor",
            RuntimeWarning,
            stacklevel=2,
        )
        W = W.tolil()
        for i in isolated:
            W[i, knn.indices[i, 0]] = 1.0
            W[knn.indices[i, 0], i] = 1.0
        W = W.tocsr()
        W.sort_indices()
    return FuzzyGraph(weights=W, rho=rho, sigma=sigma, n_nonconverged=n_bad)


def membership_target(d: np.ndarray, min_dist: float) -> np.ndarray:
    """The piecewise curve the (a, b) kernel is fitted against."""
    y = np.ones_like(d)
    far = d > min_dist
    y[far] = np.exp(-(d[far] - min_dist))
    return y


def fit_ab(min_dist: float) -> tuple[float, float]:
    """Least-squares fit of 1/(1 + a d^(2b)) to the min_dist target curve.

    Falls back to the tabulated min_dist=0.1 parameters (with a warning) if
    the fit fails to converge or leaves RMS residual above 2.5e-2; the
    smooth family cannot remove the kink at min_dist, so even the optimum
    carries RMS around 1.6e-2 at min_dist=0.1.
    """
    if min_dist <= 0:
        raise ValueError("min_dist must be positive")
    from scipy.optimize import curve_fit

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    grid = np.linspace(0.0, 3.0, 300)
    y = membership_target(grid, min_dist)
    try:
        (a, b), _ = curve_fit(curve, grid, y, p0=(1.0, 1.0), maxfev=10000)
        rms = float(np.sqrt(np.mean((curve(grid, a, b) - y) ** 2)))
    except RuntimeError:
        rms = np.inf
        a = b = float("nan")
    if not np.isfinite(rms) or rms >= 2.5e-2:
        warnings.warn(
            f"(a, b) fit failed for min_dist={min_dist} (rms={rms:.4g}); "
            "using tabulated defaults for min_dist=0.1",
            RuntimeWarning,
            stacklevel=2,
        )
        return FALLBACK_AB_MIN_DIST_01
    return float(a), float(b)


def _spectral_init(W: sp.csr_matrix, out_dims: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvectors 1..out_dims of the normalized Laplacian, or seeded random."""
    n = W.shape[0]
    try:
        deg = np.asarray(W.sum(axis=1)).ravel()
        if np.any(deg <= 0):
            raise np.linalg.LinAlgError("zero-degree vertex")
        inv_sqrt = 1.0 / np.sqrt(deg)
        if n <= 1200:
            L = np.eye(n) - (inv_sqrt[:, None] * W.toarray()) * inv_sqrt[None, :]
            vals, vecs = np.linalg.eigh(L)
            comp = vecs[:, 1 : out_dims + 1]
        else:
            Dhalf = sp.diags(inv_sqrt)
            L = sp.identity(n, format="csr") - Dhalf @ W @ Dhalf
            from scipy.sparse.linalg import eigsh

            vals, vecs = eigsh(
                L,
                k=out_dims + 1,
                which="SM",
                v0=np.ones(n),
                maxiter=n * 5,
                tol=1e-4,
            )
            order = np.argsort(vals)
            comp = vecs[:, order[1 : out_dims + 1]]
        if not np.all(np.isfinite(comp)):
            raise np.linalg.LinAlgError("non-finite eigenvectors")
        # fix the per-column sign so runs are reproducible across solvers
        for c in range(comp.shape[1]):
            pivot = int(np.argmax(np.abs(comp[:, c])))
            if comp[pivot, c] < 0:
                comp[:, c] = -comp[:, c]
        scale = 10.0 / max(np.abs(comp).max(), 1e-12)
        return comp * scale + rng.normal(0.0, 1e-4, size=comp.shape)
    except Exception:
        return rng.uniform(-10.0, 10.0, size=(n, out_dims))


def make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    """Epoch gap between updates of each edge, proportional to 1/weight."""
    result = -1.0 * np.ones(weights.shape[0])
    n_samples = n_epochs * (weights / weights.max())
    result[n_samples > 0] = float(n_epochs) / n_samples[n_samples > 0]
    return result


def umap_run(emb: EmbeddingSet, params: UmapParams = UmapParams()) -> ProjectionResult:
    """Embed into `params.out_dims` dimensions via fuzzy cross-entropy SGD."""
    n = emb.n
    if params.n_neighbors >= n:
        raise ProjectionSizingError(
            f"n_neighbors {params.n_neighbors} infeasible for N={n}; needs n_neighbors < N"
        )

    knn = knn_graph(emb, params.n_neighbors)
    graph = fuzzy_simplicial_set(knn, params.n_neighbors)
    a, b = fit_ab(params.min_dist)

    W = graph.weights.copy()
    # drop edges too weak to ever be sampled, as the reference does
    W.data[W.data < W.data.max() / params.n_epochs] = 0.0
    W.eliminate_zeros()

    coo = W.tocoo()
    head = coo.row.astype(np.int64)
    tail = coo.col.astype(np.int64)
    weights = coo.data.astype(np.float64)
    epochs_per_sample = make_epochs_per_sample(weights, params.n_epochs)

    rng = np.random.Generator(np.random.PCG64(params.seed))
    embedding = np.ascontiguousarray(_spectral_init(graph.weights, params.out_dims, rng))
    rng_state = seed_rng_state(params.seed)
    loss_trace = np.empty(params.n_epochs)

    kernels.umap_epochs(
        embedding,
        head,
        tail,
        weights,
        epochs_per_sample,
        n,
        float(a),
        float(b),
        float(params.repulsion_strength),
        float(params.learning_rate),
        float(params.negative_samples),
        params.n_epochs,
        rng_state,
        loss_trace,
    )

    return ProjectionResult(
        coords=embedding,
        loss_trace=loss_trace,
        params_echo=asdict(params),
        seed=params.seed,
        diagnostics={
            "method": "umap",
            "backend": backend_name(),
            "a": float(a),
            "b": float(b),
            "smooth_knn_nonconverged": graph.n_nonconverged,
            "n_edges": int(head.shape[0]),
        },
    )
