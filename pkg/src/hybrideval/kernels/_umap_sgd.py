"""Single-source UMAP SGD kernel, built for either backend via a factory.

The optimization loop is inherently sequential (each edge update reads the
positions written by the previous one) and draws negative samples from an
in-kernel Tausworthe generator, so the same source serves both backends:
`make_umap_epochs(jit)` returns the compiled kernel when given ``numba.njit``
and the plain-Python kernel when given an identity decorator. Both produce
the same update sequence for the same rng state.
"""

from __future__ import annotations

import numpy as np


def make_umap_epochs(jit):
    @jit
    def _clip(val):
        # gradient clamp, canonical +-4 window
        if val > 4.0:
            return 4.0
        elif val < -4.0:
            return -4.0
        return val

    @jit
    def _tau_rand_int(state):
        # Tausworthe taus88; state entries stay inside [0, 2**32)
        state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
            (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
        )
        state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
            (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
        )
        state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
            (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
        )
        return state[0] ^ state[1] ^ state[2]

    @jit
    def umap_epochs(
        embedding,
        head,
        tail,
        weights,
        epochs_per_sample,
        n_vertices,
        a,
        b,
        gamma,
        initial_alpha,
        negative_sample_rate,
        n_epochs,
        rng_state,
        loss_trace,
    ):
        """Run `n_epochs` of negative-sampling SGD on the fuzzy cross entropy.

        `embedding` is updated in place; `loss_trace[n]` receives the edge-set
        fuzzy cross entropy after epoch n. Deterministic for a given
        `rng_state`.
        """
        dim = embedding.shape[1]
        n_edges = epochs_per_sample.shape[0]
        alpha = initial_alpha

        epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
        epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
        epoch_of_next_sample = epochs_per_sample.copy()

        for n in range(n_epochs):
            for i in range(n_edges):
                if epoch_of_next_sample[i] <= n:
                    j = head[i]
                    k = tail[i]

                    dist_squared = 0.0
                    for d in range(dim):
                        diff = embedding[j, d] - embedding[k, d]
                        dist_squared += diff * diff

                    if dist_squared > 0.0:
                        grad_coeff = -2.0 * a * b * dist_squared ** (b - 1.0)
                        grad_coeff /= a * dist_squared**b + 1.0
                    else:
                        grad_coeff = 0.0

                    for d in range(dim):
                        grad_d = _clip(grad_coeff * (embedding[j, d] - embedding[k, d]))
                        embedding[j, d] += grad_d * alpha
                        embedding[k, d] -= grad_d * alpha

                    epoch_of_next_sample[i] += epochs_per_sample[i]

                    n_neg_samples = int(
                        (n - epoch_of_next_negative_sample[i])
                        / epochs_per_negative_sample[i]
                    )

                    for _ in range(n_neg_samples):
                        kk = _tau_rand_int(rng_state) % n_vertices

                        dist_squared = 0.0
                        for d in range(dim):
                            diff = embedding[j, d] - embedding[kk, d]
                            dist_squared += diff * diff

                        if dist_squared > 0.0:
                            grad_coeff = 2.0 * gamma * b
                            grad_coeff /= (0.001 + dist_squared) * (
                                a * dist_squared**b + 1.0
                            )
                        elif j == kk:
                            continue
                        else:
                            grad_coeff = 0.0

                        for d in range(dim):
                            if grad_coeff > 0.0:
                                grad_d = _clip(
                                    grad_coeff * (embedding[j, d] - embedding[kk, d])
                                )
                            else:
                                grad_d = 4.0
                            embedding[j, d] += grad_d * alpha

                    epoch_of_next_negative_sample[i] += (
                        n_neg_samples * epochs_per_negative_sample[i]
                    )

            alpha = initial_alpha * (1.0 - (n + 1.0) / n_epochs)

            # fuzzy cross entropy over the edge set, 0*log0 terms dropped
            ce = 0.0
            for i in range(n_edges):
                j = head[i]
                k = tail[i]
                dist_squared = 0.0
                for d in range(dim):
                    diff = embedding[j, d] - embedding[k, d]
                    dist_squared += diff * diff
                v = 1.0 / (1.0 + a * dist_squared**b)
                if v < 1e-12:
                    v = 1e-12
                elif v > 1.0 - 1e-12:
                    v = 1.0 - 1e-12
                w = weights[i]
                if w > 0.0:
                    ce += w * np.log(w / v)
                if w < 1.0:
                    ce += (1.0 - w) * np.log((1.0 - w) / (1.0 - v))
            loss_trace[n] = ce

        return embedding

    return umap_epochs


def seed_rng_state(seed: int) -> np.ndarray:
    """Derive a taus88 state from a 64-bit seed (entries in [16, 2**32))."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5D])))
    return gen.integers(16, 2**32 - 1, size=3, dtype=np.int64)
