"""Pure-numpy kernel implementations (fallback backend).

Vectorized equivalents of the numba loop kernels. The UMAP SGD loop cannot be
vectorized without changing its update semantics, so it runs the shared
single-source loop uncompiled; keep fallback-mode UMAP runs small.
"""

from __future__ import annotations

import math

import numpy as np

from ._umap_sgd import make_umap_epochs

EPS = 1e-12


def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances, symmetric with zero diagonal."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def calibrate_row(drow, perplexity, tol=1e-4, max_iter=100):
    """Binary-search the Gaussian bandwidth of one conditional affinity row.

    Searches precision beta = 1/(2 sigma^2) until the row perplexity 2**H
    (H in bits) is within `tol` of the target. Returns
    (sigma, p_row, converged, iterations); on non-convergence the last
    evaluated row is returned and `converged` is False.
    """
    d = np.asarray(drow, dtype=np.float64)
    shifted = d - d.min()
    beta, lo, hi = 1.0, 0.0, math.inf
    converged = False
    p = np.full(d.shape[0], 1.0 / d.shape[0])
    iters = 0
    for iters in range(1, max_iter + 1):
        w = np.exp(-shifted * beta)
        p = w / w.sum()
        nz = p > 0.0
        h = -np.sum(p[nz] * np.log2(p[nz]))
        perp = 2.0**h
        if abs(perp - perplexity) < tol:
            converged = True
            break
        if perp > perplexity:
            lo = beta
            beta = beta * 2.0 if math.isinf(hi) else 0.5 * (lo + hi)
        else:
            hi = beta
            beta = 0.5 * (lo + hi)
    sigma = math.sqrt(1.0 / (2.0 * beta))
    return sigma, p, converged, iters


def calibrate_all(D, perplexity, tol=1e-4, max_iter=100):
    """Per-row bandwidth calibration over a full squared-distance matrix.

    Returns (P, sigma, converged): P holds conditional affinities p_{j|i} by
    row with a zero diagonal.
    """
    n = D.shape[0]
    P = np.zeros((n, n))
    sigma = np.empty(n)
    converged = np.zeros(n, dtype=np.bool_)
    mask = ~np.eye(n, dtype=np.bool_)
    for i in range(n):
        sg, p, cv, _ = calibrate_row(D[i][mask[i]], perplexity, tol, max_iter)
        P[i][mask[i]] = p
        sigma[i] = sg
        converged[i] = cv
    return P, sigma, converged


def tsne_step(P, Y, exag):
    """One exact t-SNE evaluation: KL gradient at Y plus the unexaggerated KL.

    The gradient uses `exag * P` (early exaggeration); the returned KL is
    always against the true P so loss traces stay comparable across phases.
    """
    num = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    PQn = (exag * P - Q) * num
    grad = 4.0 * (PQn.sum(axis=1)[:, None] * Y - PQn @ Y)
    nz = P > 0.0
    kl = float(np.sum(P[nz] * np.log(P[nz] / np.maximum(Q[nz], EPS))))
    return grad, kl


def silhouette_samples(dist, labels, n_clusters):
    """Per-point silhouette values from a dense distance matrix.

    `labels` must be compact indices 0..n_clusters-1. Singleton-cluster
    points and all-zero neighborhoods get s(i) = 0.
    """
    n = dist.shape[0]
    counts = np.bincount(labels, minlength=n_clusters)
    sums = np.zeros((n, n_clusters))
    for c in range(n_clusters):
        sums[:, c] = dist[:, labels == c].sum(axis=1)
    own = labels
    intra_n = counts[own] - 1
    a = np.where(intra_n > 0, sums[np.arange(n), own] / np.maximum(intra_n, 1), 0.0)
    mean_other = np.where(
        counts[None, :] > 0, sums / np.maximum(counts[None, :], 1), np.inf
    )
    mean_other[np.arange(n), own] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(
        (intra_n == 0) | (denom == 0.0),
        0.0,
        (b - a) / np.where(denom == 0.0, 1.0, denom),
    )
    return s


def smooth_knn(dists, target, tol=1e-5, max_iter=64):
    """Solve per-point smoothing bandwidths for the fuzzy k-NN graph.

    `dists` holds sorted ascending neighbor distances (self excluded); row
    sums of exp(-max(0, d - rho)/sigma) are driven to `target` by bisection.
    Non-converged rows are flagged and their sigma clamped to a floor of
    1e-3 times the row's mean distance (1e-12 absolute minimum).
    """
    n, k = dists.shape
    rho = dists[:, 0].copy()
    sigma = np.empty(n)
    converged = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        lo, hi, mid = 0.0, math.inf, 1.0
        ok = False
        for _ in range(max_iter):
            psum = float(np.sum(np.exp(-np.maximum(dists[i] - rho[i], 0.0) / mid)))
            if abs(psum - target) < tol:
                ok = True
                break
            if psum > target:
                hi = mid
                mid = 0.5 * (lo + hi)
            else:
                lo = mid
                mid = mid * 2.0 if math.isinf(hi) else 0.5 * (lo + hi)
        if not ok:
            floor = 1e-3 * float(np.mean(dists[i]))
            mid = max(mid, floor, EPS)
        sigma[i] = mid
        converged[i] = ok
    return sigma, rho, converged


umap_epochs = make_umap_epochs(lambda f: f)
