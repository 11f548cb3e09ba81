"""Numba loop-kernel implementations (default backend).

Same contracts as `numpy_impl`; the loop forms avoid the O(N^2 d) temporaries
of the vectorized path and fuse the t-SNE gradient/KL pass. Reductions run in
a fixed serial order so repeat runs are bit-identical.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._umap_sgd import make_umap_epochs

EPS = 1e-12


@njit(cache=True)
def pairwise_sq_dists(X):
    n, d = X.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                acc += diff * diff
            out[i, j] = acc
            out[j, i] = acc
    return out


@njit(cache=True)
def _calibrate_row(drow, perplexity, tol, max_iter, p_out):
    m = drow.shape[0]
    dmin = drow[0]
    for j in range(1, m):
        if drow[j] < dmin:
            dmin = drow[j]
    beta = 1.0
    lo = 0.0
    hi = np.inf
    converged = False
    iters = 0
    for it in range(max_iter):
        iters = it + 1
        sw = 0.0
        for j in range(m):
            w = np.exp(-(drow[j] - dmin) * beta)
            p_out[j] = w
            sw += w
        h = 0.0
        for j in range(m):
            p = p_out[j] / sw
            p_out[j] = p
            if p > 0.0:
                h -= p * np.log2(p)
        perp = 2.0**h
        if abs(perp - perplexity) < tol:
            converged = True
            break
        if perp > perplexity:
            lo = beta
            if hi == np.inf:
                beta *= 2.0
            else:
                beta = 0.5 * (lo + hi)
        else:
            hi = beta
            beta = 0.5 * (lo + hi)
    return np.sqrt(1.0 / (2.0 * beta)), converged, iters


def calibrate_row(drow, perplexity, tol=1e-4, max_iter=100):
    drow = np.ascontiguousarray(drow, dtype=np.float64)
    p = np.empty(drow.shape[0])
    sigma, converged, iters = _calibrate_row(drow, perplexity, tol, max_iter, p)
    return sigma, p, converged, iters


@njit(cache=True)
def _calibrate_all(D, perplexity, tol, max_iter):
    n = D.shape[0]
    P = np.zeros((n, n))
    sigma = np.empty(n)
    converged = np.zeros(n, dtype=np.bool_)
    drow = np.empty(n - 1)
    p = np.empty(n - 1)
    for i in range(n):
        idx = 0
        for j in range(n):
            if j != i:
                drow[idx] = D[i, j]
                idx += 1
        sg, cv, _ = _calibrate_row(drow, perplexity, tol, max_iter, p)
        sigma[i] = sg
        converged[i] = cv
        idx = 0
        for j in range(n):
            if j != i:
                P[i, j] = p[idx]
                idx += 1
    return P, sigma, converged


def calibrate_all(D, perplexity, tol=1e-4, max_iter=100):
    return _calibrate_all(np.ascontiguousarray(D, dtype=np.float64), perplexity, tol, max_iter)


@njit(cache=True)
def tsne_step(P, Y, exag):
    n, m = Y.shape
    num = np.empty((n, n))
    z = 0.0
    for i in range(n):
        num[i, i] = 0.0
        for j in range(i + 1, n):
            d2 = 0.0
            for k in range(m):
                diff = Y[i, k] - Y[j, k]
                d2 += diff * diff
            v = 1.0 / (1.0 + d2)
            num[i, j] = v
            num[j, i] = v
            z += 2.0 * v
    grad = np.zeros((n, m))
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            q = num[i, j] / z
            pij = P[i, j]
            c = 4.0 * (exag * pij - q) * num[i, j]
            for k in range(m):
                grad[i, k] += c * (Y[i, k] - Y[j, k])
            if pij > 0.0:
                qc = q if q > EPS else EPS
                kl += pij * np.log(pij / qc)
    return grad, kl


@njit(cache=True)
def silhouette_samples(dist, labels, n_clusters):
    n = dist.shape[0]
    counts = np.zeros(n_clusters, dtype=np.int64)
    for i in range(n):
        counts[labels[i]] += 1
    s = np.zeros(n)
    sums = np.zeros(n_clusters)
    for i in range(n):
        for c in range(n_clusters):
            sums[c] = 0.0
        for j in range(n):
            sums[labels[j]] += dist[i, j]
        own = labels[i]
        intra_n = counts[own] - 1
        if intra_n == 0:
            s[i] = 0.0
            continue
        a = sums[own] / intra_n
        b = np.inf
        for c in range(n_clusters):
            if c == own or counts[c] == 0:
                continue
            mc = sums[c] / counts[c]
            if mc < b:
                b = mc
        denom = a if a > b else b
        if denom == 0.0:
            s[i] = 0.0
        else:
            s[i] = (b - a) / denom
    return s


@njit(cache=True)
def smooth_knn(dists, target, tol=1e-5, max_iter=64):
    n, k = dists.shape
    rho = np.empty(n)
    sigma = np.empty(n)
    converged = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        rho[i] = dists[i, 0]
        lo = 0.0
        hi = np.inf
        mid = 1.0
        ok = False
        for _ in range(max_iter):
            psum = 0.0
            for j in range(k):
                d = dists[i, j] - rho[i]
                if d > 0.0:
                    psum += np.exp(-d / mid)
                else:
                    psum += 1.0
            if abs(psum - target) < tol:
                ok = True
                break
            if psum > target:
                hi = mid
                mid = 0.5 * (lo + hi)
            else:
                lo = mid
                if hi == np.inf:
                    mid *= 2.0
                else:
                    mid = 0.5 * (lo + hi)
        if not ok:
            mean_d = 0.0
            for j in range(k):
                mean_d += dists[i, j]
            floor = 1e-3 * (mean_d / k)
            if mid < floor:
                mid = floor
            if mid < EPS:
                mid = EPS
        sigma[i] = mid
        converged[i] = ok
    return sigma, rho, converged


umap_epochs = make_umap_epochs(njit)
