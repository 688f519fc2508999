"""
Affinity Module
Sparse high-dimensional probabilities P: kNN search, per-point bandwidth
calibration to a target perplexity, and symmetrization.
"""

import logging
import math
import warnings

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial.distance import cdist
from sklearn.neighbors import NearestNeighbors

from src.config import AFFINITY_CONFIG
from src.embedding_model import (BandwidthCalibration, NeighborLists,
                                 SparseAffinities)
from src.preprocess import pca_reduce

logger = logging.getLogger(__name__)


def neighbor_count(perplexity):
    """k = floor(3 * perplexity)"""
    return int(math.floor(AFFINITY_CONFIG["neighbor_factor"] * perplexity))


def knn(data, k):
    """
    Exact k nearest neighbors by Euclidean distance, self excluded.

    Ties are broken by lower index. Up to AFFINITY_CONFIG["brute_force_max_n"]
    points a chunked brute-force scan is used, above it a ball tree.

    Args:
        data (DataMatrix): Points
        k (int): Neighbor count, k < n

    Returns:
        NeighborLists: (n, k) indices and squared distances
    """
    X = data.values
    n = X.shape[0]
    if not 0 < k < n:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")

    if n <= AFFINITY_CONFIG["brute_force_max_n"]:
        return _knn_brute_force(X, k)
    return _knn_ball_tree(X, k)


def _knn_brute_force(X, k):
    n = X.shape[0]
    chunk = AFFINITY_CONFIG["brute_force_chunk"]
    indices = np.empty((n, k), dtype=np.int64)
    sq_distances = np.empty((n, k), dtype=np.float64)

    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = cdist(X[start:stop], X, metric="sqeuclidean")
        rows = np.arange(stop - start)
        block[rows, rows + start] = np.inf
        # stable sort keeps equal distances in index order
        order = np.argsort(block, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        sq_distances[start:stop] = np.take_along_axis(block, order, axis=1)

    return NeighborLists(indices, sq_distances)


def _knn_ball_tree(X, k):
    n = X.shape[0]
    model = NearestNeighbors(n_neighbors=k + 1, algorithm="ball_tree").fit(X)
    _, found = model.kneighbors(X)

    # drop self, or the farthest candidate when a duplicate displaced self
    is_self = found == np.arange(n)[:, None]
    no_self = ~is_self.any(axis=1)
    is_self[no_self, -1] = True
    found = found[~is_self].reshape(n, k)

    chunk = AFFINITY_CONFIG["brute_force_chunk"]
    sq = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = X[start:stop, None, :] - X[found[start:stop]]
        sq[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)

    order = np.lexsort((found, sq))
    return NeighborLists(np.take_along_axis(found, order, axis=1),
                         np.take_along_axis(sq, order, axis=1))


def _row_entropy(shifted, log_sigma):
    """Conditional rows and their entropy in nats for Gaussian bandwidths exp(log_sigma)"""
    beta = 0.5 * np.exp(-2.0 * log_sigma)[:, None]
    weights = np.exp(-shifted * beta)
    totals = weights.sum(axis=1)
    probs = weights / totals[:, None]
    entropy = np.log(totals) + (beta[:, 0] * np.sum(probs * shifted, axis=1))
    return probs, entropy


def calibrate_bandwidths(neighbors, perplexity, tol=None, max_steps=None):
    """
    Bisect log(sigma_i) per point until 2^H(P_i) matches the target perplexity.

    Args:
        neighbors (NeighborLists): Truncated neighbor sets
        perplexity (float): Target perplexity, below the neighbor count
        tol (float): Absolute perplexity tolerance
        max_steps (int): Bisection step limit

    Returns:
        BandwidthCalibration: sigmas, conditional rows, achieved perplexities and
        the indices whose search did not converge
    """
    tol = AFFINITY_CONFIG["perplexity_tol"] if tol is None else tol
    max_steps = AFFINITY_CONFIG["max_bisection_steps"] if max_steps is None else max_steps

    D = neighbors.sq_distances
    n, k = D.shape
    if not 1.0 <= perplexity < k:
        raise ValueError(f"perplexity must lie in [1, {k}), got {perplexity}")

    # distances relative to the nearest neighbor keep exp() in range
    shifted = D - D.min(axis=1, keepdims=True)
    low_bound, high_bound = AFFINITY_CONFIG["log_sigma_bounds"]
    lo = np.full(n, low_bound)
    hi = np.full(n, high_bound)
    best = np.zeros(n)
    best_gap = np.full(n, np.inf)
    active = np.arange(n)

    for _ in range(max_steps):
        if active.size == 0:
            break
        mid = 0.5 * (lo[active] + hi[active])
        _, entropy = _row_entropy(shifted[active], mid)
        gap = np.exp(entropy) - perplexity

        closer = np.abs(gap) < best_gap[active]
        best[active[closer]] = mid[closer]
        best_gap[active[closer]] = np.abs(gap[closer])

        too_wide = gap > 0
        hi[active[too_wide]] = mid[too_wide]
        lo[active[~too_wide]] = mid[~too_wide]
        active = active[np.abs(gap) >= tol]

    conditional, entropy = _row_entropy(shifted, best)
    unconverged = np.flatnonzero(best_gap >= tol)
    if unconverged.size:
        message = (f"Perplexity search did not converge for {unconverged.size} points; "
                   "keeping the closest bandwidth")
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)

    return BandwidthCalibration(
        sigmas=np.exp(best),
        conditional=conditional,
        perplexities=np.exp(entropy),
        unconverged=unconverged,
    )


def symmetrize_normalize(neighbors, conditional, perplexity=float("nan")):
    """
    p_ij = (p_{j|i} + p_{i|j}) / (2n) on the union of the neighbor graphs.

    Args:
        neighbors (NeighborLists): Neighbor indices per row
        conditional (ndarray): (n, k) conditional rows, each summing to 1

    Returns:
        SparseAffinities: Symmetric P summing to 1
    """
    n, k = neighbors.indices.shape
    rows = np.repeat(np.arange(n), k)
    cond = csr_matrix((np.asarray(conditional, dtype=np.float64).ravel(),
                       (rows, neighbors.indices.ravel())), shape=(n, n))
    P = (cond + cond.T) / (2.0 * n)
    P.eliminate_zeros()
    return SparseAffinities(P, perplexity=perplexity, n_neighbors=k)


def build_affinities(data, perplexity, pca_dims=None):
    """
    Full P pipeline: PCA, kNN with k = floor(3 * perplexity), calibration, symmetrization.

    Small inputs clamp k to n - 1 and the perplexity below k.

    Args:
        data (DataMatrix): Raw input
        perplexity (float): Target perplexity
        pca_dims (int): PCA target (default AFFINITY_CONFIG["pca_dims"])

    Returns:
        tuple: (SparseAffinities, reduced DataMatrix)
    """
    pca_dims = AFFINITY_CONFIG["pca_dims"] if pca_dims is None else pca_dims
    target = min(pca_dims, data.n_dims, data.n_points)
    reduced = pca_reduce(data, target)

    k = min(neighbor_count(perplexity), data.n_points - 1)
    effective = perplexity
    if effective >= k:
        effective = max(k / 3.0, 1.0) if k > 1 else 1.0
        logger.warning(f"Perplexity {perplexity} too large for n={data.n_points}; "
                       f"using {effective:.3f} with k={k}")

    logger.info(f"Affinities: n={data.n_points}, dims={target}, k={k}, perplexity={effective}")
    neighbors = knn(reduced, k)
    if k == 1:
        conditional = np.ones((data.n_points, 1))
    else:
        conditional = calibrate_bandwidths(neighbors, effective).conditional
    P = symmetrize_normalize(neighbors, conditional, perplexity=effective)
    return P, reduced
