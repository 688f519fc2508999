"""
Objective Module
Hyperbolic t-SNE cost: low-dimensional probabilities q, KL divergence, the
exact O(n^2) gradient and the quadtree-accelerated gradient.

Both gradients return the variation
    4 * (sum_j p_ij w_ij h_ij - sum_j w_ij^2 h_ij / Z)
with w_ij = 1 / (1 + d_ij^2) and h_ij = d_ij * dd_ij/dy_i, and Z summed over
all ordered pairs. Coincident pairs add 1 to Z and nothing to the force.
"""

import logging

import numba
import numpy as np
from scipy.sparse import csr_matrix

from src.config import METRICS_CONFIG, QUADTREE_CONFIG
from src.embedding_model import (GradientField, SparseAffinities, SplitRule,
                                 TraversalStats)
from src.geometry import (check_interior, hyperbolic_distance, pair_terms,
                          squared_distance_gradient)
from src.quadtree import PolarQuadtree

logger = logging.getLogger(__name__)


def _coords(embedding):
    Y = np.ascontiguousarray(np.asarray(embedding, dtype=np.float64))
    if Y.ndim != 2 or Y.shape[1] != 2:
        raise ValueError(f"embedding must have shape (n, 2), got {Y.shape}")
    check_interior(Y, "embedding point")
    return Y


def pairwise_distances(embedding):
    """Dense (n, n) hyperbolic distance matrix"""
    Y = _coords(embedding)
    return hyperbolic_distance(Y[:, None, :], Y[None, :, :])


def q_matrix_exact(embedding):
    """
    Dense low-dimensional probabilities.

    Args:
        embedding: (n, 2) Poincare points, n >= 2

    Returns:
        tuple: (Q with zero diagonal and off-diagonal sum 1, Z)
    """
    Y = _coords(embedding)
    if Y.shape[0] < 2:
        raise ValueError("q_matrix_exact needs at least two points")
    D = pairwise_distances(Y)
    W = 1.0 / (1.0 + D * D)
    np.fill_diagonal(W, 0.0)
    Z = float(W.sum())
    return W / Z, Z


@numba.njit(parallel=True, cache=True)
def _exact_z_kernel(x, y):
    n = x.shape[0]
    z = np.zeros(n)
    for i in numba.prange(n):
        acc = 0.0
        for j in range(n):
            if j != i:
                d, _, _ = pair_terms(x[i], y[i], x[j], y[j])
                acc += 1.0 / (1.0 + d * d)
        z[i] = acc
    return z


@numba.njit(parallel=True, cache=True)
def _pair_distance_kernel(x, y, rows, cols):
    out = np.empty(rows.shape[0])
    for e in numba.prange(rows.shape[0]):
        i = rows[e]
        j = cols[e]
        d, _, _ = pair_terms(x[i], y[i], x[j], y[j])
        out[e] = d
    return out


def normalization_exact(embedding):
    """Z = sum over ordered pairs i != j of 1 / (1 + d_ij^2)"""
    Y = _coords(embedding)
    return float(_exact_z_kernel(Y[:, 0].copy(), Y[:, 1].copy()).sum())


def kl_cost(P, embedding, z=None):
    """
    KL(P || Q) over the stored entries of P.

    Args:
        P (SparseAffinities): Normalized affinities
        embedding: (n, 2) Poincare points
        z (float): Normalization to use; the exact O(n^2) sum when None

    Returns:
        float: sum p_ij log(p_ij / q_ij), q floored at METRICS_CONFIG["q_floor"]
    """
    Y = _coords(embedding)
    if z is None:
        z = normalization_exact(Y)
    m = P.matrix.tocoo()
    keep = m.data > 0
    rows = m.row[keep].astype(np.int64)
    cols = m.col[keep].astype(np.int64)
    p = m.data[keep]
    d = _pair_distance_kernel(Y[:, 0].copy(), Y[:, 1].copy(), rows, cols)
    q = np.maximum(1.0 / (1.0 + d * d) / z, METRICS_CONFIG["q_floor"])
    return float(np.sum(p * np.log(p / q)))


@numba.njit(parallel=True, cache=True)
def _attractive_kernel(indptr, indices, data, x, y, factor):
    n = x.shape[0]
    out = np.zeros((n, 2))
    for i in numba.prange(n):
        fx = 0.0
        fy = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j == i:
                continue
            d, hx, hy = pair_terms(x[i], y[i], x[j], y[j])
            w = factor * data[e] / (1.0 + d * d)
            fx += w * hx
            fy += w * hy
        out[i, 0] = fx
        out[i, 1] = fy
    return out


@numba.njit(parallel=True, cache=True)
def _exact_repulsion_kernel(x, y):
    n = x.shape[0]
    rep = np.zeros((n, 2))
    z = np.zeros(n)
    for i in numba.prange(n):
        fx = 0.0
        fy = 0.0
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            d, hx, hy = pair_terms(x[i], y[i], x[j], y[j])
            w = 1.0 / (1.0 + d * d)
            acc += w
            fx += w * w * hx
            fy += w * w * hy
        rep[i, 0] = fx
        rep[i, 1] = fy
        z[i] = acc
    return rep, z


@numba.njit(parallel=True, cache=True)
def _tree_repulsion_kernel(x, y, theta, child, count, leaf_state, leaf_x, leaf_y,
                           mid_x, mid_y, cell_sizes, stack_size):
    n = x.shape[0]
    rep = np.zeros((n, 2))
    z = np.zeros(n)
    visits = np.zeros(n, dtype=np.int64)
    summaries = np.zeros(n, dtype=np.int64)
    for i in numba.prange(n):
        stack = np.empty(stack_size, dtype=np.int64)
        stack[0] = 0
        top = 1
        fx = 0.0
        fy = 0.0
        acc = 0.0
        nv = 0
        ns = 0
        while top > 0:
            top -= 1
            node = stack[top]
            c = count[node]
            if c == 0:
                continue
            if child[node] < 0:
                if leaf_state[node] == 1:
                    px = leaf_x[node]
                    py = leaf_y[node]
                else:
                    px = mid_x[node]
                    py = mid_y[node]
                if px == x[i] and py == y[i]:
                    acc += c - 1
                    continue
                d, hx, hy = pair_terms(x[i], y[i], px, py)
                w = 1.0 / (1.0 + d * d)
                acc += c * w
                fx += c * w * w * hx
                fy += c * w * w * hy
                nv += 1
                continue
            d, hx, hy = pair_terms(x[i], y[i], mid_x[node], mid_y[node])
            if d > 0.0 and cell_sizes[node] < theta * d:
                w = 1.0 / (1.0 + d * d)
                acc += c * w
                fx += c * w * w * hx
                fy += c * w * w * hy
                nv += 1
                ns += 1
                continue
            first = child[node]
            for q in range(3, -1, -1):
                stack[top] = first + q
                top += 1
        rep[i, 0] = fx
        rep[i, 1] = fy
        z[i] = acc
        visits[i] = nv
        summaries[i] = ns
    return rep, z, visits, summaries


def attractive_term(P, embedding, exaggeration=1.0):
    """sum_j factor * p_ij * w_ij * h_ij over the stored entries of P"""
    Y = _coords(embedding)
    indptr, indices, data = P.kernel_arrays()
    return _attractive_kernel(indptr, indices, data, Y[:, 0].copy(), Y[:, 1].copy(),
                              float(exaggeration))


def gradient_exact(P, embedding, exaggeration=1.0):
    """
    Exact gradient: attractive term over stored P, repulsive term over all pairs.

    Args:
        P (SparseAffinities): Normalized affinities
        embedding: (n, 2) Poincare points
        exaggeration (float): Factor applied to P in the attractive term

    Returns:
        GradientField
    """
    Y = _coords(embedding)
    attract = attractive_term(P, Y, exaggeration)
    rep, z = _exact_repulsion_kernel(Y[:, 0].copy(), Y[:, 1].copy())
    Z = float(z.sum())
    return GradientField(4.0 * (attract - rep / Z), Z)


def tree_repulsion(tree, embedding, theta):
    """
    Unnormalized repulsive forces and per-point Z contributions via the tree.

    Returns:
        tuple: (rep (n, 2), z (n,), TraversalStats)
    """
    Y = _coords(embedding)
    stack_size = 4 * (int(tree.depth.max()) + 2)
    rep, z, visits, summaries = _tree_repulsion_kernel(
        Y[:, 0].copy(), Y[:, 1].copy(), float(theta),
        tree.child, tree.count, tree.leaf_state,
        np.ascontiguousarray(tree.leaf_points[:, 0]), np.ascontiguousarray(tree.leaf_points[:, 1]),
        np.ascontiguousarray(tree.midpoints[:, 0]), np.ascontiguousarray(tree.midpoints[:, 1]),
        tree.cell_sizes, stack_size)
    total = int(visits.sum())
    n_summary = int(summaries.sum())
    stats = TraversalStats(visits=total, summary_visits=n_summary,
                           leaf_visits=total - n_summary, n_queries=Y.shape[0])
    return rep, z, stats


def gradient_accelerated(P, embedding, tree=None, theta=0.5, exaggeration=1.0,
                         rule=SplitRule.EQUAL_LENGTH):
    """
    Quadtree-accelerated gradient.

    The attractive term is identical to gradient_exact. The repulsive term
    and Z come from one far-field traversal per point; Z is the global sum of
    all per-point contributions.

    Args:
        P (SparseAffinities): Normalized affinities
        embedding: (n, 2) Poincare points
        tree (PolarQuadtree): Tree over the same embedding (built when None)
        theta (float): Opening angle, >= 0
        exaggeration (float): Factor applied to P in the attractive term
        rule (SplitRule): Split rule used when the tree is built here

    Returns:
        tuple: (GradientField, TraversalStats)
    """
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    Y = _coords(embedding)
    if tree is None:
        tree = PolarQuadtree(Y, rule=rule, max_depth=QUADTREE_CONFIG["max_depth"])
    elif tree.n_points != Y.shape[0]:
        raise ValueError("tree was built over a different embedding")

    attract = attractive_term(P, Y, exaggeration)
    rep, z, stats = tree_repulsion(tree, Y, theta)
    Z = float(z.sum())
    return GradientField(4.0 * (attract - rep / Z), Z), stats


def gradient_from_visits(P, embedding, tree, theta, exaggeration=1.0):
    """
    Accelerated gradient assembled from tree.iter_far_field in pure Python.

    Slow; used to cross-check the compiled traversal.
    """
    Y = _coords(embedding)
    attract = attractive_term(P, Y, exaggeration)
    rep = np.zeros_like(Y)
    Z = 0.0
    for i in range(Y.shape[0]):
        for visit in tree.iter_far_field(Y[i], theta):
            if visit.kind == "coincident":
                Z += visit.count
                continue
            w = 1.0 / (1.0 + visit.distance ** 2)
            Z += visit.count * w
            rep[i] += visit.count * w * w * squared_distance_gradient(Y[i], visit.point)
    return GradientField(4.0 * (attract - rep / Z), Z)


def compile_kernels():
    """Trigger JIT compilation on a tiny instance so timed iterations exclude it"""
    Y = np.array([[0.0, 0.0], [1e-3, 0.0], [0.0, 1e-3], [1e-3, 1e-3]])
    P = SparseAffinities(csr_matrix(np.full((4, 4), 1.0 / 12.0) - np.eye(4) / 12.0))
    gradient_exact(P, Y)
    gradient_accelerated(P, Y, theta=0.5)
    kl_cost(P, Y)
    logger.debug("Compiled objective kernels")


