#!/usr/bin/env python3
"""Tests for Poincare-disk and Klein-model primitives"""

import math
import sys
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

sys.path.insert(0, str(Path(__file__).parent))

from src.embedding_model import HyperbolicDomainError  # noqa: E402
from src.geometry import (MidpointAccumulator, check_interior,  # noqa: E402
                          distance_gradient, einstein_midpoint, exp_map,
                          from_polar, hyperbolic_distance, klein_to_poincare,
                          metric_factor, mobius_add, pair_distance, pair_terms,
                          poincare_to_klein, project_to_disk,
                          squared_distance_gradient, to_polar)


def random_points(n, seed=0, max_norm=0.9):
    rng = np.random.default_rng(seed)
    radius = max_norm * np.sqrt(rng.uniform(0, 1, n))
    angle = rng.uniform(0, 2 * np.pi, n)
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)


def test_distance_known_values():
    assert hyperbolic_distance([0, 0], [0, 0]) == 0.0
    assert_allclose(hyperbolic_distance([0, 0], [0.5, 0]), math.log(3.0), rtol=1e-12)
    eps = 1e-4
    far = hyperbolic_distance([-1 + eps, 0], [1 - eps, 0])
    assert_allclose(far, 2 * math.log((2 - eps) / eps), rtol=1e-9)


def test_distance_metric_axioms():
    a, b, c = random_points(200, 1), random_points(200, 2), random_points(200, 3)
    d_ab = hyperbolic_distance(a, b)
    assert np.all(d_ab >= 0)
    assert_allclose(d_ab, hyperbolic_distance(b, a), rtol=1e-12)
    assert_allclose(hyperbolic_distance(a, a), 0.0, atol=1e-12)
    assert np.all(d_ab <= hyperbolic_distance(a, c) + hyperbolic_distance(c, b) + 1e-9)


def test_domain_errors():
    for bad in ([1.0, 0.0], [0.8, 0.8], [np.nan, 0.0]):
        try:
            check_interior(np.array(bad))
        except HyperbolicDomainError:
            continue
        raise AssertionError(f"{bad} accepted as interior")
    try:
        hyperbolic_distance([0, 0], [0, 1])
    except HyperbolicDomainError:
        pass
    else:
        raise AssertionError("boundary point accepted")


def test_metric_factor():
    assert metric_factor([0, 0]) == 2.0
    assert_allclose(metric_factor([0.5, 0]), 2 / 0.75)


def test_distance_gradient_matches_finite_differences():
    a, b = random_points(10, 4, 0.7), random_points(10, 5, 0.7)
    h = 1e-6
    for yi, yj in zip(a, b):
        numeric = np.array([
            (hyperbolic_distance(yi + h * e, yj) - hyperbolic_distance(yi - h * e, yj)) / (2 * h)
            for e in np.eye(2)
        ])
        assert_allclose(distance_gradient(yi, yj), numeric, rtol=1e-5, atol=1e-8)
    # moving away from yj along the geodesic increases the distance
    assert distance_gradient([0.5, 0.0], [0.1, 0.0])[0] > 0


def test_squared_distance_gradient():
    a, b = random_points(50, 6), random_points(50, 7)
    expected = hyperbolic_distance(a, b)[:, None] * distance_gradient(a, b)
    assert_allclose(squared_distance_gradient(a, b), expected, rtol=1e-10)
    assert_allclose(squared_distance_gradient([0.3, 0.1], [0.3, 0.1]), [0.0, 0.0])


def test_scalar_kernels_match_vectorized():
    a, b = random_points(20, 8), random_points(20, 9)
    grads = squared_distance_gradient(a, b)
    dists = hyperbolic_distance(a, b)
    for i in range(20):
        d, hx, hy = pair_terms(a[i, 0], a[i, 1], b[i, 0], b[i, 1])
        assert_allclose(d, dists[i], rtol=1e-12)
        assert_allclose([hx, hy], grads[i], rtol=1e-10, atol=1e-14)
        assert_allclose(pair_distance(a[i, 0], a[i, 1], b[i, 0], b[i, 1]), dists[i], rtol=1e-12)
    assert pair_terms(0.1, 0.2, 0.1, 0.2) == (0.0, 0.0, 0.0)


def test_mobius_identities():
    a, b = random_points(30, 10), random_points(30, 11)
    assert_allclose(mobius_add(np.zeros(2), b), b, atol=1e-15)
    assert_allclose(mobius_add(a, np.zeros(2)), a, atol=1e-15)
    assert_allclose(mobius_add(a, -a), 0.0, atol=1e-12)
    # left translation by -a is an isometry sending a to the origin
    assert_allclose(hyperbolic_distance(mobius_add(-a, a), mobius_add(-a, b)),
                    hyperbolic_distance(a, b), rtol=1e-9)


def test_exp_map_origin_law():
    rng = np.random.default_rng(12)
    for norm in (1e-6, 0.1, 1.0, 3.0):
        direction = rng.normal(size=2)
        v = norm * direction / np.linalg.norm(direction)
        expected = 2 * math.atanh(math.tanh(norm))
        assert_allclose(hyperbolic_distance([0, 0], exp_map([0, 0], v)), expected, rtol=1e-9)
    base = np.array([0.3, -0.2])
    assert_allclose(exp_map(base, [0.0, 0.0]), base)


def test_project_to_disk():
    inside = np.array([[0.2, 0.1], [0.0, 0.999]])
    assert_allclose(project_to_disk(inside), inside)
    projected = project_to_disk(np.array([[1.5, 0.0], [0.0, -1.0]]))
    assert_allclose(np.linalg.norm(projected, axis=1), 1 - 1e-5, rtol=1e-15)
    assert projected[1, 1] < 0
    try:
        project_to_disk(inside, eps=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("eps=0 accepted")


def test_klein_roundtrip():
    p = random_points(500, 13, 0.999)
    assert np.max(np.abs(klein_to_poincare(poincare_to_klein(p)) - p)) < 1e-12


def test_einstein_midpoint():
    p = np.array([0.4, -0.3])
    assert_allclose(einstein_midpoint(p[None, :]), p, atol=1e-12)
    assert_allclose(einstein_midpoint(np.array([p, -p])), [0.0, 0.0], atol=1e-15)
    # the midpoint of two points is equidistant from both
    a, b = np.array([0.5, 0.1]), np.array([-0.2, 0.6])
    m = einstein_midpoint(np.array([a, b]))
    assert_allclose(hyperbolic_distance(m, a), hyperbolic_distance(m, b), rtol=1e-9)

    points = random_points(40, 14)
    acc = MidpointAccumulator()
    for q in points:
        acc.add(q)
    assert acc.count == 40
    assert_allclose(acc.midpoint(), einstein_midpoint(points), atol=1e-12)


def test_polar_roundtrip():
    p = random_points(100, 15)
    r, phi = to_polar(p)
    assert np.all((phi >= 0) & (phi < 2 * np.pi))
    assert_allclose(r, hyperbolic_distance(np.zeros_like(p), p), rtol=1e-9)
    assert_allclose(from_polar(r, phi), p, atol=1e-12)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
