"""Exact O(N^2) t-SNE.

Conditional affinities are calibrated per point by binary search on the
Gaussian bandwidth until the row perplexity 2**H (H in bits) matches the
target within 1e-4. The joint P is the symmetrized conditional matrix
divided by 2N; the low-dimensional side uses the Student-t kernel. Descent
runs with momentum, adaptive per-coordinate gains and an early exaggeration
phase, the canonical recipe. Everything is a pure function of
(input, params, seed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .. import kernels
from .._accel import backend_name
from ._types import EmbeddingSet, ProjectionResult, ProjectionSizingError

PERPLEXITY_TOL = 1e-4
MAX_CALIBRATION_ITERS = 100
MIN_GAIN = 0.01
AFFINITY_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 30.0
    out_dims: int = 2
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    total_iters: int = 1000
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 1.0:
            raise ValueError("perplexity must be >= 1")
        if self.out_dims not in (2, 3):
            raise ValueError("out_dims must be 2 or 3")
        if self.total_iters < 1 or self.exaggeration_iters < 0:
            raise ValueError("iteration counts must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


class CalibrationResult(NamedTuple):
    sigma: float
    p_row: np.ndarray
    converged: bool


def pairwise_sq_dists(vectors) -> np.ndarray:
    """Validated all-pairs squared Euclidean distances (zero diagonal)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    finite_rows = np.isfinite(vectors).all(axis=1)
    if not finite_rows.all():
        raise ValueError(f"non-finite vector at row {int(np.where(~finite_rows)[0][0])}")
    return kernels.pairwise_sq_dists(vectors)


def perplexity_calibration(dists_row, perplexity: float) -> CalibrationResult:
    """Calibrate one conditional affinity row to the target perplexity.

    `dists_row` holds the squared distances from one point to the others
    (self excluded). Rows that cannot reach the target (for example all-equal
    distances) come back uniform with `converged=False` and sigma at the
    search bound.
    """
    if perplexity < 1.0:
        raise ValueError("perplexity must be >= 1")
    sigma, p_row, converged, _ = kernels.calibrate_row(
        np.asarray(dists_row, dtype=np.float64),
        float(perplexity),
        PERPLEXITY_TOL,
        MAX_CALIBRATION_ITERS,
    )
    return CalibrationResult(sigma=float(sigma), p_row=p_row, converged=bool(converged))


def joint_affinities(vectors: np.ndarray, perplexity: float) -> tuple[np.ndarray, dict]:
    """Symmetrized joint probabilities P = (P_{j|i} + P_{i|j}) / 2N."""
    D = kernels.pairwise_sq_dists(vectors)
    cond, sigma, converged = kernels.calibrate_all(
        D, float(perplexity), PERPLEXITY_TOL, MAX_CALIBRATION_ITERS
    )
    n = vectors.shape[0]
    P = (cond + cond.T) / (2.0 * n)
    diag = {
        "sigma_min": float(np.min(sigma)),
        "sigma_max": float(np.max(sigma)),
        "calibration_nonconverged": int(np.sum(~converged)),
    }
    return P, diag


def low_dim_affinities(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Student-t affinities Q and the unnormalized kernel matrix."""
    num = 1.0 / (1.0 + kernels.pairwise_sq_dists(np.asarray(coords, dtype=np.float64)))
    np.fill_diagonal(num, 0.0)
    return num / num.sum(), num


def tsne_gradient(P: np.ndarray, Q: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Analytic KL gradient 4 sum_j (p_ij - q_ij)(y_i - y_j)/(1 + |y_i - y_j|^2)."""
    coords = np.asarray(coords, dtype=np.float64)
    num = 1.0 / (1.0 + kernels.pairwise_sq_dists(coords))
    np.fill_diagonal(num, 0.0)
    PQn = (P - Q) * num
    return 4.0 * (PQn.sum(axis=1)[:, None] * coords - PQn @ coords)


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    nz = P > 0.0
    return float(np.sum(P[nz] * np.log(P[nz] / np.maximum(Q[nz], AFFINITY_FLOOR))))


def max_perplexity(n: int) -> float:
    """Feasibility bound: perplexity must stay below (N - 1) / 3."""
    return (n - 1) / 3.0


def tsne_run(emb: EmbeddingSet, params: TsneParams = TsneParams()) -> ProjectionResult:
    """Project an embedding set to `params.out_dims` dimensions.

    Deterministic for a given seed: the init is drawn from PCG64(seed) and
    the descent itself is seed-free. The loss trace records KL(P||Q) against
    the unexaggerated P at the top of every iteration.
    """
    n = emb.n
    if params.perplexity >= max_perplexity(n):
        raise ProjectionSizingError(
            f"perplexity {params.perplexity} infeasible for N={n}; "
            f"needs perplexity < (N-1)/3 = {max_perplexity(n):.2f}"
        )

    P, diag = joint_affinities(emb.vectors, params.perplexity)

    rng = np.random.Generator(np.random.PCG64(params.seed))
    Y = rng.normal(0.0, 1e-4, size=(n, params.out_dims))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    loss_trace = np.empty(params.total_iters)

    for it in range(params.total_iters):
        exag = params.early_exaggeration if it < params.exaggeration_iters else 1.0
        momentum = params.momentum_early if it < params.exaggeration_iters else params.momentum_late
        grad, kl = kernels.tsne_step(P, Y, exag)
        loss_trace[it] = kl

        same_sign = (grad > 0.0) == (velocity > 0.0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        velocity = momentum * velocity - params.learning_rate * (gains * grad)
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    return ProjectionResult(
        coords=Y,
        loss_trace=loss_trace,
        params_echo=asdict(params),
        seed=params.seed,
        diagnostics={**diag, "method": "tsne", "backend": backend_name()},
    )
