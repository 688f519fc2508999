"""
Preprocessing Module
PCA reduction and seed-deterministic subsampling of input matrices
"""

import logging
import math
import warnings

import numpy as np
from sklearn.decomposition import PCA

from src.embedding_model import DataMatrix

logger = logging.getLogger(__name__)

# relative variance below which a principal axis counts as absent
RANK_TOLERANCE = 1e-12


def pca_reduce(data, target_dims):
    """
    Project mean-centered data onto its top principal axes.

    Each axis is oriented so its largest-magnitude loading is positive, which
    makes the output independent of the SVD backend's sign choice.

    Args:
        data (DataMatrix): Input matrix
        target_dims (int): Number of components, at most min(n, d)

    Returns:
        DataMatrix: (n, target_dims) scores; rank_deficient is set and the
        missing axes are zero when the data has fewer than target_dims
        informative directions
    """
    n, d = data.values.shape
    if target_dims < 1 or target_dims > min(n, d):
        raise ValueError(f"target_dims must lie in [1, {min(n, d)}], got {target_dims}")

    model = PCA(n_components=target_dims, svd_solver="full")
    with warnings.catch_warnings():
        # zero total variance makes sklearn divide 0/0 for the variance ratios
        warnings.simplefilter("ignore", RuntimeWarning)
        scores = model.fit_transform(data.values)

    components = model.components_
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(target_dims), pivots])
    signs[signs == 0] = 1.0
    scores = scores * signs

    variance = model.explained_variance_
    top = float(np.max(variance)) if variance.size else 0.0
    missing = variance <= RANK_TOLERANCE * top if top > 0 else np.ones(target_dims, dtype=bool)
    rank_deficient = bool(np.any(missing))
    if rank_deficient:
        scores[:, missing] = 0.0
        message = (f"PCA: data has rank {int(np.sum(~missing))} < {target_dims}; "
                   "missing components are zero")
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)

    return DataMatrix(scores, data.labels, rank_deficient=rank_deficient)


def subsample_indices(n, fraction, seed):
    """
    Draw ceil(fraction * n) distinct indices without replacement.

    Args:
        n (int): Population size
        fraction (float): Sample fraction in (0, 1]
        seed (int): RNG seed

    Returns:
        ndarray: Sorted sample indices
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    size = min(n, int(math.ceil(round(fraction * n, 9))))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=size, replace=False))
