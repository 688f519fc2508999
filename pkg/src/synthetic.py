"""
Synthetic benchmark data: Gaussian mixtures and tree-structured clusters
"""

import numpy as np
from sklearn.datasets import make_blobs

from src.embedding_model import DataMatrix


def gaussian_mixture(n=600, n_clusters=3, dims=50, separation=10.0, seed=0):
    """
    Mixture of isotropic unit-variance Gaussians.

    Args:
        n (int): Number of points
        n_clusters (int): Number of components
        dims (int): Ambient dimension
        separation (float): Half-width of the box the centers are drawn from
        seed (int): RNG seed

    Returns:
        DataMatrix: points labelled by component
    """
    values, labels = make_blobs(n_samples=n, n_features=dims, centers=n_clusters,
                                cluster_std=1.0, center_box=(-separation, separation),
                                random_state=seed)
    return DataMatrix(values, labels)


def hierarchical(n=2000, branching=3, depth=3, dims=50, spread=8.0, decay=0.4, seed=0):
    """
    Tree-structured clusters: each level perturbs its parent's center by a
    Gaussian whose scale shrinks by `decay` per level; points are drawn
    around the leaf centers and labelled by their top-level branch.
    """
    rng = np.random.default_rng(seed)
    centers = np.zeros((1, dims))
    branch = np.zeros(1, dtype=np.int64)
    scale = spread
    for level in range(depth):
        offsets = rng.normal(scale=scale, size=(centers.shape[0], branching, dims))
        centers = (centers[:, None, :] + offsets).reshape(-1, dims)
        if level == 0:
            branch = np.arange(branching)
        else:
            branch = np.repeat(branch, branching)
        scale *= decay

    leaf = rng.integers(0, centers.shape[0], size=n)
    values = centers[leaf] + rng.normal(scale=scale, size=(n, dims))
    return DataMatrix(values, branch[leaf])


GENERATORS = {
    "gaussian": gaussian_mixture,
    "hierarchical": hierarchical,
}


def generate(name, n, seed=0, **kwargs):
    """Dispatch to a generator by name"""
    if name not in GENERATORS:
        raise ValueError(f"Unknown synthetic dataset '{name}', choose from {sorted(GENERATORS)}")
    return GENERATORS[name](n=n, seed=seed, **kwargs)
