#!/usr/bin/env python3
"""Tests for the t-SNE cost and the exact and tree-accelerated gradients"""

import sys
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose
from scipy.sparse import csr_matrix

sys.path.insert(0, str(Path(__file__).parent))

from src.embedding_model import SparseAffinities, SplitRule  # noqa: E402
from src.objective import (attractive_term, compile_kernels,  # noqa: E402
                           gradient_accelerated, gradient_exact,
                           gradient_from_visits, kl_cost, normalization_exact,
                           pairwise_distances, q_matrix_exact)
from src.quadtree import build  # noqa: E402


def random_embedding(n, seed=0, max_norm=0.6):
    rng = np.random.default_rng(seed)
    radius = max_norm * np.sqrt(rng.uniform(0, 1, n))
    angle = rng.uniform(0, 2 * np.pi, n)
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)


def random_affinities(n, seed=0, density=1.0):
    """Symmetric P with zero diagonal summing to one"""
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, (n, n)) * (rng.uniform(0, 1, (n, n)) < density)
    A = A + A.T
    np.fill_diagonal(A, 0.0)
    return SparseAffinities(csr_matrix(A / A.sum()))


def relative_norm(exact, approx):
    exact = np.asarray(exact)
    return np.linalg.norm(np.asarray(approx) - exact) / np.linalg.norm(exact)


def test_q_matrix():
    Y = random_embedding(30, 1)
    Q, Z = q_matrix_exact(Y)
    assert_allclose(Q.sum(), 1.0, rtol=1e-12)
    assert_allclose(Q, Q.T, rtol=1e-12)
    assert np.all(np.diag(Q) == 0)
    assert_allclose(Z, normalization_exact(Y), rtol=1e-12)
    D = pairwise_distances(Y)
    assert_allclose(Q[3, 7], 1.0 / (1.0 + D[3, 7] ** 2) / Z, rtol=1e-12)


def test_kl_cost_nonnegative():
    Y = random_embedding(25, 2)
    P = random_affinities(25, 2, density=0.3)
    cost = kl_cost(P, Y)
    assert cost >= 0
    # an explicit Z reproduces the default
    assert_allclose(kl_cost(P, Y, z=normalization_exact(Y)), cost, rtol=1e-12)


def test_exact_gradient_matches_finite_differences():
    n = 8
    Y = random_embedding(n, 3, max_norm=0.5)
    P = random_affinities(n, 3)
    grad = gradient_exact(P, Y).vectors
    h = 1e-6
    numeric = np.zeros_like(Y)
    for i in range(n):
        for axis in range(2):
            plus, minus = Y.copy(), Y.copy()
            plus[i, axis] += h
            minus[i, axis] -= h
            numeric[i, axis] = (kl_cost(P, plus) - kl_cost(P, minus)) / (2 * h)
    assert relative_norm(numeric, grad) < 1e-4


def test_zero_theta_tree_matches_exact():
    Y = random_embedding(150, 4, max_norm=0.9)
    P = random_affinities(150, 4, density=0.1)
    exact = gradient_exact(P, Y)
    for rule in SplitRule:
        approx, stats = gradient_accelerated(P, Y, theta=0.0, rule=rule)
        assert relative_norm(exact.vectors, approx.vectors) < 1e-9
        assert_allclose(approx.z, exact.z, rtol=1e-12)
        assert stats.summary_visits == 0
        assert stats.visits == 150 * 149


def test_accelerated_gradient_is_close():
    Y = random_embedding(400, 5, max_norm=0.8)
    P = random_affinities(400, 5, density=0.05)
    exact = gradient_exact(P, Y, exaggeration=12.0)
    approx, stats = gradient_accelerated(P, Y, theta=0.5, exaggeration=12.0)
    assert approx.is_finite()
    assert relative_norm(exact.vectors, approx.vectors) < 0.1
    assert abs(approx.z - exact.z) / exact.z < 0.05
    assert stats.summary_visits > 0
    assert stats.visits_per_point < 399


def test_gradients_follow_rotations_and_reflections():
    Y = random_embedding(80, 9, max_norm=0.85)
    P = random_affinities(80, 9, density=0.2)
    angle = 0.7
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    mirror = np.diag([1.0, -1.0])

    exact = gradient_exact(P, Y)
    tree_field, _ = gradient_accelerated(P, Y, theta=0.0)
    for transform in (rotation, mirror):
        moved = Y @ transform.T
        expected = exact.vectors @ transform.T
        moved_exact = gradient_exact(P, moved)
        assert relative_norm(expected, moved_exact.vectors) < 1e-9
        assert_allclose(moved_exact.z, exact.z, rtol=1e-12)

        moved_tree, _ = gradient_accelerated(P, moved, theta=0.0)
        assert relative_norm(tree_field.vectors @ transform.T, moved_tree.vectors) < 1e-9


def test_compiled_traversal_matches_python_traversal():
    Y = random_embedding(120, 6, max_norm=0.9)
    P = random_affinities(120, 6, density=0.1)
    tree = build(Y, rule=SplitRule.EQUAL_AREA)
    compiled, _ = gradient_accelerated(P, Y, tree=tree, theta=0.7)
    reference = gradient_from_visits(P, Y, tree, 0.7)
    assert_allclose(compiled.vectors, reference.vectors, rtol=1e-9, atol=1e-12)
    assert_allclose(compiled.z, reference.z, rtol=1e-12)


def test_coincident_points():
    Y = np.vstack([np.tile([0.2, 0.1], (3, 1)), random_embedding(7, 7, max_norm=0.5)])
    P = random_affinities(10, 7)
    exact = gradient_exact(P, Y)
    approx, _ = gradient_accelerated(P, Y, theta=0.0)
    assert exact.is_finite() and approx.is_finite()
    assert_allclose(approx.vectors, exact.vectors, rtol=1e-9, atol=1e-12)
    # each ordered pair of copies contributes w = 1 to Z
    assert_allclose(exact.z, normalization_exact(Y), rtol=1e-12)
    assert exact.z > 6.0


def test_exaggeration_scales_attraction():
    Y = random_embedding(20, 8)
    P = random_affinities(20, 8)
    assert_allclose(attractive_term(P, Y, 12.0), 12.0 * attractive_term(P, Y), rtol=1e-12)


def test_argument_checks():
    Y = random_embedding(10, 9)
    P = random_affinities(10, 9)
    for call in (lambda: gradient_accelerated(P, Y, theta=-1.0),
                 lambda: gradient_accelerated(P, Y, tree=build(Y[:5])),
                 lambda: gradient_exact(P, np.zeros((10, 3)))):
        try:
            call()
        except ValueError:
            continue
        raise AssertionError("invalid arguments accepted")


def test_compile_kernels():
    compile_kernels()


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
