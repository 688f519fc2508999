"""
Quadtree Module
Polar quadtree over the Poincare disk: annulus root, angular/radial splits
under two radial rules, per-node counts with rolling Einstein midpoints, and
far-field traversal with the opening-angle criterion.

Node data lives in flat, pre-allocated numpy arrays (one entry per node, four
contiguous children per internal node) so the compiled kernels in
src.objective can walk the tree without Python objects.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numba
import numpy as np

from src.config import QUADTREE_CONFIG
from src.embedding_model import SplitRule, TraversalStats
from src.geometry import (check_interior, einstein_midpoint, from_polar,
                          hyperbolic_distance, klein_to_poincare,
                          lorentz_factor, poincare_to_klein, to_polar)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# leaf states
SINGLE = 1      # one distinct location, possibly repeated
MULTIPLE = 2    # several locations stuck at max depth

# root radius used when every point sits at the origin
MIN_ROOT_RADIUS = 1e-12


@numba.njit(cache=True)
def _split_kernel(min_r, max_r, rule):
    if rule == 1:
        # acosh((cosh a + cosh b) / 2) via cosh x = 1 + 2 sinh^2(x/2)
        sa = math.sinh(0.5 * min_r)
        sb = math.sinh(0.5 * max_r)
        s = sa * sa + sb * sb
        return math.log1p(s + math.sqrt(s * (s + 2.0)))
    return 0.5 * (min_r + max_r)


def radial_split(min_r, max_r, rule=SplitRule.EQUAL_LENGTH):
    """
    Radial split point of a cell.

    Args:
        min_r, max_r (float): Hyperbolic radial bounds, 0 <= min_r < max_r
        rule (SplitRule): EQUAL_LENGTH (arithmetic mean) or EQUAL_AREA
            (acosh((cosh max_r + cosh min_r) / 2))

    Returns:
        float: mid_r
    """
    if not 0 <= min_r < max_r:
        raise ValueError(f"radial bounds must satisfy 0 <= min_r < max_r, got ({min_r}, {max_r})")
    return float(_split_kernel(float(min_r), float(max_r), SplitRule.parse(rule).code))


@dataclass(frozen=True)
class PolarCell:
    """Annular sector [min_r, max_r] x [min_phi, max_phi) in hyperbolic polar coordinates"""
    min_r: float
    max_r: float
    min_phi: float
    max_phi: float

    @property
    def mid_phi(self) -> float:
        return 0.5 * (self.min_phi + self.max_phi)

    def mid_r(self, rule=SplitRule.EQUAL_LENGTH) -> float:
        return radial_split(self.min_r, self.max_r, rule)

    def contains(self, r, phi) -> bool:
        # closed bounds: split values belong to the outer/upper child
        return self.min_r <= r <= self.max_r and self.min_phi <= phi <= self.max_phi

    def size(self) -> float:
        return cell_size(self)


def cell_size_arrays(min_r, max_r, min_phi, max_phi):
    """
    Vectorized r_cell: the largest of the diagonal, the outer-arc chord and
    the radial edge, as hyperbolic lengths between cell corners.

    Cells spanning at least pi hold two antipodal points on their outer arc,
    so their chord is the full diameter 2 * max_r.
    """
    min_r = np.asarray(min_r, dtype=np.float64)
    max_r = np.asarray(max_r, dtype=np.float64)
    min_phi = np.asarray(min_phi, dtype=np.float64)
    max_phi = np.asarray(max_phi, dtype=np.float64)

    inner_low = from_polar(min_r, min_phi)
    outer_low = from_polar(max_r, min_phi)
    outer_high = from_polar(max_r, max_phi)

    diagonal = hyperbolic_distance(inner_low, outer_high)
    chord = np.where(max_phi - min_phi >= math.pi, 2.0 * max_r,
                     hyperbolic_distance(outer_low, outer_high))
    radial = max_r - min_r
    return np.maximum(np.maximum(diagonal, chord), radial)


def cell_size(cell):
    """r_cell of a single PolarCell"""
    return float(cell_size_arrays(cell.min_r, cell.max_r, cell.min_phi, cell.max_phi))


@numba.njit(cache=True)
def _child_for(node, r, phi, child, min_phi, max_phi, mid_r):
    a = 1 if phi >= 0.5 * (min_phi[node] + max_phi[node]) else 0
    b = 1 if r >= mid_r[node] else 0
    return child[node] + 2 * a + b


@numba.njit(cache=True)
def _build_kernel(px, py, pr, pphi, kx, ky, kg, root_max_r, rule, max_depth,
                  min_r, max_r, min_phi, max_phi, mid_r, child, count, depth,
                  sum_g, sum_gx, sum_gy, leaf_state, leaf_index):
    """Insert all points; returns the node count, or -1 when the arrays are too small"""
    capacity = min_r.shape[0]
    min_r[0] = 0.0
    max_r[0] = root_max_r
    min_phi[0] = 0.0
    max_phi[0] = TWO_PI
    mid_r[0] = _split_kernel(0.0, root_max_r, rule)
    child[0] = -1
    depth[0] = 0
    n_nodes = 1

    for i in range(px.shape[0]):
        node = 0
        while True:
            count[node] += 1
            sum_g[node] += kg[i]
            sum_gx[node] += kg[i] * kx[i]
            sum_gy[node] += kg[i] * ky[i]

            if child[node] >= 0:
                node = _child_for(node, pr[i], pphi[i], child, min_phi, max_phi, mid_r)
                continue

            if count[node] == 1:
                leaf_state[node] = 1
                leaf_index[node] = i
                break
            if leaf_state[node] == 2:
                break
            j = leaf_index[node]
            if px[j] == px[i] and py[j] == py[i]:
                break
            if depth[node] >= max_depth:
                leaf_state[node] = 2
                break
            if n_nodes + 4 > capacity:
                return -1

            first = n_nodes
            n_nodes += 4
            mid_phi = 0.5 * (min_phi[node] + max_phi[node])
            for a in range(2):
                for b in range(2):
                    c = first + 2 * a + b
                    min_phi[c] = mid_phi if a == 1 else min_phi[node]
                    max_phi[c] = max_phi[node] if a == 1 else mid_phi
                    min_r[c] = mid_r[node] if b == 1 else min_r[node]
                    max_r[c] = max_r[node] if b == 1 else mid_r[node]
                    mid_r[c] = _split_kernel(min_r[c], max_r[c], rule)
                    child[c] = -1
                    depth[c] = depth[node] + 1
            child[node] = first

            # push the resident location (all its copies) one level down
            old = count[node] - 1
            c = _child_for(node, pr[j], pphi[j], child, min_phi, max_phi, mid_r)
            count[c] = old
            sum_g[c] = old * kg[j]
            sum_gx[c] = old * kg[j] * kx[j]
            sum_gy[c] = old * kg[j] * ky[j]
            leaf_state[c] = 1
            leaf_index[c] = j
            leaf_state[node] = 0
            leaf_index[node] = -1

            node = _child_for(node, pr[i], pphi[i], child, min_phi, max_phi, mid_r)
    return n_nodes


@dataclass
class QuadNode:
    """Read-only view of one tree node"""
    index: int
    cell: PolarCell
    count: int
    midpoint: Optional[np.ndarray]
    children: tuple
    leaf_point: Optional[np.ndarray]
    depth: int

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class FarFieldVisit:
    """One contribution emitted by a far-field traversal"""
    node: int
    count: int
    point: np.ndarray
    distance: float
    kind: str        # "summary", "leaf" or "coincident"


@dataclass
class TreeAudit:
    """Structural checks over a built tree"""
    n_nodes: int
    n_leaves: int
    counts_consistent: bool
    containment_ok: bool
    max_midpoint_error: float
    mean_leaf_depth: float
    max_depth: int

    @property
    def ok(self) -> bool:
        return self.counts_consistent and self.containment_ok


class PolarQuadtree:
    """
    Polar quadtree built over a fixed embedding.

    The root is the annulus [0, r_max] x [0, 2pi) where r_max is the
    hyperbolic radius of the farthest point. Angular splits are at the mean
    angle, radial splits follow the chosen SplitRule. Points with identical
    coordinates share a leaf and are tracked by its count.
    """

    def __init__(self, points, rule=SplitRule.EQUAL_LENGTH, max_depth=None):
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 1:
            raise ValueError(f"PolarQuadtree needs an (n, 2) array with n >= 1, got {points.shape}")
        check_interior(points, "tree point")

        self.points = points
        self.rule = SplitRule.parse(rule)
        self.max_depth = QUADTREE_CONFIG["max_depth"] if max_depth is None else int(max_depth)

        r, phi = to_polar(points)
        klein = poincare_to_klein(points)
        gamma = lorentz_factor(klein)
        self.radii = r
        self.angles = phi
        self.root_radius = max(float(r.max()), MIN_ROOT_RADIUS)

        capacity = QUADTREE_CONFIG["initial_capacity_factor"] * points.shape[0] + 16
        while True:
            arrays = self._allocate(capacity)
            n_nodes = _build_kernel(points[:, 0].copy(), points[:, 1].copy(), r, phi,
                                    klein[:, 0].copy(), klein[:, 1].copy(), gamma,
                                    self.root_radius, self.rule.code, self.max_depth,
                                    *arrays)
            if n_nodes >= 0:
                break
            capacity *= 2
            logger.debug(f"Quadtree capacity exceeded; retrying with {capacity} nodes")

        (self.min_r, self.max_r, self.min_phi, self.max_phi, self.mid_r, self.child,
         self.count, self.depth, self.sum_g, self.sum_gx, self.sum_gy,
         self.leaf_state, self.leaf_index) = [a[:n_nodes] for a in arrays]

        self._finalize()

    @staticmethod
    def _allocate(capacity):
        floats = [np.zeros(capacity) for _ in range(5)]
        child = np.full(capacity, -1, dtype=np.int64)
        count = np.zeros(capacity, dtype=np.int64)
        depth = np.zeros(capacity, dtype=np.int64)
        sums = [np.zeros(capacity) for _ in range(3)]
        leaf_state = np.zeros(capacity, dtype=np.int64)
        leaf_index = np.full(capacity, -1, dtype=np.int64)
        return (*floats, child, count, depth, *sums, leaf_state, leaf_index)

    def _finalize(self):
        """Midpoints from the Klein accumulators, leaf coordinates, and r_cell"""
        n_nodes = self.n_nodes
        self.midpoints = np.zeros((n_nodes, 2))
        filled = self.count > 0
        klein = np.stack([self.sum_gx[filled], self.sum_gy[filled]], axis=1) / self.sum_g[filled, None]
        self.midpoints[filled] = klein_to_poincare(klein)

        self.leaf_points = np.zeros((n_nodes, 2))
        single = self.leaf_state == SINGLE
        self.leaf_points[single] = self.points[self.leaf_index[single]]
        # a single-location leaf's midpoint is its point, bit for bit
        self.midpoints[single] = self.leaf_points[single]

        self.cell_sizes = cell_size_arrays(self.min_r, self.max_r, self.min_phi, self.max_phi)

    @property
    def n_nodes(self) -> int:
        return self.child.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def is_leaf(self, node) -> bool:
        return self.child[node] < 0

    def children_of(self, node) -> tuple:
        first = self.child[node]
        return () if first < 0 else tuple(range(first, first + 4))

    def cell(self, node) -> PolarCell:
        return PolarCell(float(self.min_r[node]), float(self.max_r[node]),
                         float(self.min_phi[node]), float(self.max_phi[node]))

    def node(self, index) -> QuadNode:
        filled = self.count[index] > 0
        leaf_point = self.leaf_points[index].copy() if self.leaf_state[index] == SINGLE else None
        return QuadNode(
            index=int(index),
            cell=self.cell(index),
            count=int(self.count[index]),
            midpoint=self.midpoints[index].copy() if filled else None,
            children=self.children_of(index),
            leaf_point=leaf_point,
            depth=int(self.depth[index]),
        )

    def leaves(self) -> np.ndarray:
        """Indices of nonempty leaves"""
        return np.flatnonzero((self.child < 0) & (self.count > 0))

    def descend(self, r, phi) -> list:
        """Node path from the root to the leaf whose cell holds (r, phi)"""
        path = [0]
        node = 0
        while self.child[node] >= 0:
            a = 1 if phi >= 0.5 * (self.min_phi[node] + self.max_phi[node]) else 0
            b = 1 if r >= self.mid_r[node] else 0
            node = int(self.child[node] + 2 * a + b)
            path.append(node)
        return path

    def iter_far_field(self, query, theta) -> Iterator[FarFieldVisit]:
        """
        Depth-first far-field traversal for one query point.

        A node whose midpoint differs from the query and satisfies
        r_cell / d(query, y_cell) < theta yields one summary visit and its
        subtree is skipped. Leaves yield exact visits. Copies of the query
        itself come out as a "coincident" visit with count - 1.
        """
        if theta < 0:
            raise ValueError(f"theta must be >= 0, got {theta}")
        query = np.asarray(query, dtype=np.float64)
        check_interior(query, "query")

        stack = [0]
        while stack:
            node = stack.pop()
            n_cell = int(self.count[node])
            if n_cell == 0:
                continue

            if self.child[node] < 0:
                point = self.leaf_points[node] if self.leaf_state[node] == SINGLE else self.midpoints[node]
                if point[0] == query[0] and point[1] == query[1]:
                    if n_cell > 1:
                        yield FarFieldVisit(node, n_cell - 1, point.copy(), 0.0, "coincident")
                    continue
                d = hyperbolic_distance(query, point)
                yield FarFieldVisit(node, n_cell, point.copy(), d, "leaf")
                continue

            mid = self.midpoints[node]
            d = hyperbolic_distance(query, mid)
            if d > 0.0 and self.cell_sizes[node] < theta * d:
                yield FarFieldVisit(node, n_cell, mid.copy(), d, "summary")
                continue
            first = int(self.child[node])
            stack.extend(range(first + 3, first - 1, -1))

    def audit(self) -> TreeAudit:
        return audit_tree(self)

    def __repr__(self):
        return (f"PolarQuadtree(n={self.n_points}, nodes={self.n_nodes}, "
                f"rule={self.rule.value})")


def build(points, rule=SplitRule.EQUAL_LENGTH, max_depth=None):
    """
    Build a polar quadtree over Poincare points.

    Args:
        points: (n, 2) points strictly inside the disk, n >= 1
        rule (SplitRule): Radial split rule
        max_depth (int): Depth cap (default QUADTREE_CONFIG["max_depth"])

    Returns:
        PolarQuadtree

    Raises:
        HyperbolicDomainError: a point has norm >= 1
    """
    return PolarQuadtree(points, rule=rule, max_depth=max_depth)


def traverse_far_field(tree, query, theta, visitor=None):
    """
    Run one far-field traversal, feeding each visit to visitor.

    Args:
        tree (PolarQuadtree): Built tree
        query: Poincare point
        theta (float): Opening angle, >= 0
        visitor (callable): Called with each FarFieldVisit

    Returns:
        tuple: (TraversalStats for this query, number of points accounted for)
    """
    stats = TraversalStats(n_queries=1)
    accounted = 0
    for visit in tree.iter_far_field(query, theta):
        if visitor is not None:
            visitor(visit)
        accounted += visit.count
        if visit.kind == "coincident":
            continue
        stats.visits += 1
        if visit.kind == "summary":
            stats.summary_visits += 1
        else:
            stats.leaf_visits += 1
    return stats, accounted


def audit_tree(tree, check_midpoints=True):
    """
    Verify counts, containment and midpoints of a built tree.

    Every point is descended by its polar coordinates; its leaf must contain
    it, and every node's finalized midpoint is compared with a batch Einstein
    midpoint over the points routed through it.
    """
    counts_consistent = True
    for node in np.flatnonzero(tree.child >= 0):
        first = tree.child[node]
        if tree.count[first:first + 4].sum() != tree.count[node]:
            counts_consistent = False
            break
    if tree.count[0] != tree.n_points:
        counts_consistent = False

    members = {}
    containment_ok = True
    leaf_depths = []
    for i in range(tree.n_points):
        r, phi = float(tree.radii[i]), float(tree.angles[i])
        path = tree.descend(r, phi)
        leaf = path[-1]
        if not tree.cell(leaf).contains(r, phi):
            containment_ok = False
        leaf_depths.append(int(tree.depth[leaf]))
        if check_midpoints:
            for node in path:
                members.setdefault(node, []).append(i)

    for node, idx in members.items():
        if len(idx) != tree.count[node]:
            counts_consistent = False

    max_error = 0.0
    if check_midpoints:
        for node, idx in members.items():
            batch = einstein_midpoint(tree.points[idx])
            max_error = max(max_error, float(np.max(np.abs(batch - tree.midpoints[node]))))

    leaves = tree.leaves()
    audit = TreeAudit(
        n_nodes=tree.n_nodes,
        n_leaves=int(leaves.size),
        counts_consistent=counts_consistent,
        containment_ok=containment_ok,
        max_midpoint_error=max_error,
        mean_leaf_depth=float(np.mean(leaf_depths)) if leaf_depths else 0.0,
        max_depth=int(tree.depth.max()),
    )
    if not audit.ok:
        logger.warning(f"Quadtree audit failed: {audit}")
    return audit
