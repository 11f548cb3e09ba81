#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel on synthetic data in both backends, reports wall times
and the maximum absolute disagreement. The UMAP SGD loop is the same source
in both backends (compiled vs interpreted), so its numbers show the raw JIT
speedup; the other kernels compare loop kernels against vectorized numpy.

Usage: python benchmarks/bench_kernels.py [--n 600] [--dim 64] [--repeat 3]
"""

import argparse
import time

import numpy as np


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=600)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--umap-points", type=int, default=150)
    parser.add_argument("--umap-epochs", type=int, default=50)
    args = parser.parse_args()

    try:
        from hybrideval.kernels import numba_impl
    except ImportError:
        print("numba is not available; nothing to compare.")
        return 1
    from hybrideval.kernels import numpy_impl
    from hybrideval.kernels._umap_sgd import seed_rng_state

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.n, args.dim))
    rows = []

    # warm up the JIT so compile time is not measured
    numba_impl.pairwise_sq_dists(X[:8])

    t_nb, D = best_of(lambda: numba_impl.pairwise_sq_dists(X), args.repeat)
    t_np, D2 = best_of(lambda: numpy_impl.pairwise_sq_dists(X), args.repeat)
    rows.append(("pairwise_sq_dists", t_nb, t_np, np.abs(D - D2).max()))

    numba_impl.calibrate_all(D[:8, :8], 2.0, 1e-4, 100)
    t_nb, (Pa, _, _) = best_of(lambda: numba_impl.calibrate_all(D, 30.0, 1e-4, 100), args.repeat)
    t_np, (Pb, _, _) = best_of(lambda: numpy_impl.calibrate_all(D, 30.0, 1e-4, 100), args.repeat)
    rows.append(("calibrate_all", t_nb, t_np, np.abs(Pa - Pb).max()))

    P = (Pa + Pa.T) / (2.0 * args.n)
    Y = rng.normal(size=(args.n, 2))
    numba_impl.tsne_step(P[:8, :8], Y[:8], 1.0)
    t_nb, (ga, kla) = best_of(lambda: numba_impl.tsne_step(P, Y, 12.0), args.repeat)
    t_np, (gb, klb) = best_of(lambda: numpy_impl.tsne_step(P, Y, 12.0), args.repeat)
    rows.append(("tsne_step", t_nb, t_np, max(np.abs(ga - gb).max(), abs(kla - klb))))

    labels = rng.integers(0, 4, size=args.n).astype(np.int64)
    dist = np.sqrt(D)
    numba_impl.silhouette_samples(dist[:8, :8], labels[:8] % 2, 2)
    t_nb, sa = best_of(lambda: numba_impl.silhouette_samples(dist, labels, 4), args.repeat)
    t_np, sb = best_of(lambda: numpy_impl.silhouette_samples(dist, labels, 4), args.repeat)
    rows.append(("silhouette_samples", t_nb, t_np, np.abs(sa - sb).max()))

    # UMAP SGD: same loop source, compiled vs interpreted
    from hybrideval.projection import fuzzy_simplicial_set, knn_graph
    from hybrideval.projection._types import EmbeddingSet

    m = args.umap_points
    emb = EmbeddingSet(X[:m, :8], np.zeros(m, dtype=int), tuple(f"i{i}" for i in range(m)))
    graph = fuzzy_simplicial_set(knn_graph(emb, 10), 10)
    coo = graph.weights.tocoo()
    head, tail = coo.row.astype(np.int64), coo.col.astype(np.int64)
    weights = coo.data.astype(np.float64)
    eps = np.maximum(weights.max() / weights, 1.0)
    init = rng.normal(size=(m, 2))

    def run_sgd(impl):
        embedding = init.copy()
        trace = np.empty(args.umap_epochs)
        impl.umap_epochs(embedding, head, tail, weights, eps.copy(), m,
                         1.577, 0.895, 1.0, 1.0, 5.0, args.umap_epochs,
                         seed_rng_state(3), trace)
        return embedding

    run_sgd(numba_impl)  # compile
    t_nb, ea = best_of(lambda: run_sgd(numba_impl), args.repeat)
    t_np, eb = best_of(lambda: run_sgd(numpy_impl), max(1, args.repeat - 2))
    rows.append((f"umap_epochs (N={m}, {args.umap_epochs}ep)", t_nb, t_np, np.abs(ea - eb).max()))

    print(f"\nkernel benchmark: N={args.n}, dim={args.dim}, best of {args.repeat}")
    print(f"{'kernel':<34} {'numba':>10} {'numpy':>10} {'speedup':>8} {'max |diff|':>12}")
    for name, t_nb, t_np, diff in rows:
        print(f"{name:<34} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x {diff:>12.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
