"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Import-time dispatch: `hybrideval._accel.USING_NUMBA` decides which
implementation module backs the public names below. Both modules expose the
same signatures and are cross-checked in the test suite; callers never need
to know which one is active (``hybrideval._accel.backend_name()`` tells you).
"""

from .._accel import USING_NUMBA

if USING_NUMBA:
    from . import numba_impl as impl
else:
    from . import numpy_impl as impl

pairwise_sq_dists = impl.pairwise_sq_dists
calibrate_row = impl.calibrate_row
calibrate_all = impl.calibrate_all
tsne_step = impl.tsne_step
silhouette_samples = impl.silhouette_samples
smooth_knn = impl.smooth_knn
umap_epochs = impl.umap_epochs

__all__ = [
    "USING_NUMBA",
    "pairwise_sq_dists",
    "calibrate_row",
    "calibrate_all",
    "tsne_step",
    "silhouette_samples",
    "smooth_knn",
    "umap_epochs",
]
