#!/usr/bin/env python3
"""Tests for error metrics, neighborhood quality and timing statistics"""

import math
import sys
import warnings
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

sys.path.insert(0, str(Path(__file__).parent))

from src.embedding_model import (DataMatrix, IterationRecord, Phase,  # noqa: E402
                                 RunReport)
from src.geometry import hyperbolic_distance  # noqa: E402
from src.metrics import (estimate_alpha, evaluate_embedding,  # noqa: E402
                         hyperbolic_knn, is_sample_iteration, one_nn_error,
                         precision_recall, relative_cost_error,
                         relative_gradient_error, run_timing, sample_schedule,
                         timing_summary)


def circle_points(n, radius=0.5, seed=0):
    angles = np.sort(np.random.default_rng(seed).uniform(0, 2 * np.pi, n))
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def test_relative_gradient_error():
    g = np.array([[0.1, 0.0], [0.0, -0.2], [0.05, 0.05]])
    assert relative_gradient_error(g, g) == 0.0
    assert relative_gradient_error(g, np.zeros_like(g)) == 1.0
    assert 0 < relative_gradient_error(g, 1.1 * g) < 0.2
    assert math.isnan(relative_gradient_error(np.zeros((3, 2)), g))
    try:
        relative_gradient_error(g, g[:2])
    except ValueError:
        pass
    else:
        raise AssertionError("shape mismatch accepted")


def test_relative_gradient_error_clamps_large_vectors():
    g = np.array([[3.0, 0.0], [0.0, 0.1]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value, clamped = relative_gradient_error(g, g, return_clamped=True)
    assert clamped
    assert value == 0.0
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
    _, clamped = relative_gradient_error(g * 0.1, g * 0.1, return_clamped=True)
    assert not clamped


def test_relative_cost_error():
    assert relative_cost_error(2.0, 1.5) == 0.25
    assert relative_cost_error(2.0, 2.5) == 0.25
    assert math.isnan(relative_cost_error(0.0, 1.0))


def test_hyperbolic_knn_matches_distance_order():
    rng = np.random.default_rng(1)
    Y = rng.uniform(-0.6, 0.6, size=(80, 2))
    found = hyperbolic_knn(Y, 5)
    D = hyperbolic_distance(Y[:, None, :], Y[None, :, :])
    np.fill_diagonal(D, np.inf)
    assert_array_equal(found, np.argsort(D, axis=1, kind="stable")[:, :5])
    try:
        hyperbolic_knn(Y, 80)
    except ValueError:
        pass
    else:
        raise AssertionError("k = n accepted")


def test_one_nn_error():
    left = np.array([[-0.5, 0.0], [-0.5, 0.01], [-0.49, 0.0]])
    right = -left
    Y = np.vstack([left, right])
    assert one_nn_error(Y, [0, 0, 0, 1, 1, 1]) == 0.0
    assert one_nn_error(Y, [0, 1, 0, 1, 0, 1]) > 0.0
    pairs = np.array([[-0.5, 0.0], [-0.49, 0.0], [0.5, 0.0], [0.49, 0.0]])
    assert one_nn_error(pairs, [0, 1, 0, 1]) == 1.0


def test_one_nn_error_with_random_labels():
    rng = np.random.default_rng(11)
    n, classes = 1000, 4
    radius = 0.9 * np.sqrt(rng.uniform(0, 1, n))
    angle = rng.uniform(0, 2 * np.pi, n)
    Y = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    labels = rng.permutation(np.arange(n) % classes)
    error = one_nn_error(Y, labels)
    assert abs(error - (classes - 1) / classes) < 0.05

    turn = 1.1
    rotation = np.array([[np.cos(turn), -np.sin(turn)], [np.sin(turn), np.cos(turn)]])
    assert one_nn_error(Y @ rotation.T, labels) == error


def test_precision_recall_identity():
    Y = circle_points(60, seed=2)
    curve = precision_recall(DataMatrix(Y), Y, k_max=10)
    assert curve.k_max == 10
    assert_allclose(curve.precision, 1.0)
    assert_allclose(curve.recall, np.arange(1, 11) / 10)
    assert curve.mean_precision() == 1.0


def test_precision_recall_bounds():
    rng = np.random.default_rng(3)
    X = DataMatrix(rng.normal(size=(100, 8)))
    Y = rng.uniform(-0.5, 0.5, size=(100, 2))
    curve = precision_recall(X, Y, k_max=15)
    assert curve.precision.shape == (15,) and curve.recall.shape == (15,)
    assert np.all((curve.precision >= 0) & (curve.precision <= 1))
    assert np.all(np.diff(curve.recall) >= -1e-12)
    assert curve.recall[-1] == curve.precision[-1]
    for bad in (0, 100):
        try:
            precision_recall(X, Y, k_max=bad)
        except ValueError:
            continue
        raise AssertionError(f"k_max={bad} accepted")


def test_estimate_alpha():
    sizes = [1000, 2000, 4000]
    estimate = estimate_alpha(sizes, [1e-3 * (n / 1000) ** 2 for n in sizes])
    assert_allclose(estimate.alphas, [2.0, 2.0], rtol=1e-12)
    assert_allclose(estimate.mean_alpha, 2.0)
    for args in (([1000], [1.0]), ([2000, 1000], [1.0, 2.0]), ([1000, 2000], [1.0, 0.0])):
        try:
            estimate_alpha(*args)
        except ValueError:
            continue
        raise AssertionError(f"{args} accepted")


def test_timing_tables():
    assert timing_summary([]) == {"count": 0}
    summary = timing_summary([1.0, 2.0, 3.0])
    assert summary["count"] == 3
    assert summary["min"] == 1.0 and summary["max"] == 3.0
    assert_allclose(summary["avg"], 2.0)
    assert_allclose(summary["std"], math.sqrt(2.0 / 3.0))

    report = RunReport(config={})
    report.iterations = [IterationRecord(0, Phase.EXAGGERATION, 0.1, 0.01),
                         IterationRecord(1, Phase.EXAGGERATION, 0.3, 0.02),
                         IterationRecord(2, Phase.MAIN, 0.2, 0.03)]
    timing = run_timing(report)
    assert timing["pooled"]["count"] == 3
    assert timing["exaggeration"]["count"] == 2
    assert_allclose(timing["main"]["avg"], 0.2)


def test_sample_schedule():
    early = sample_schedule(Phase.EXAGGERATION)
    assert 0 in early and 249 in early
    assert is_sample_iteration("main", 749)
    assert is_sample_iteration(Phase.MAIN, 700)
    assert not is_sample_iteration(Phase.MAIN, 701)


def test_evaluate_embedding_small_input():
    Y = circle_points(10, seed=4)
    results = evaluate_embedding(DataMatrix(Y), Y, labels=np.arange(10) % 2)
    assert results["precision_recall"]["k_max"] == 9
    assert_allclose(results["mean_precision"], 1.0)
    assert 0.0 <= results["one_nn_error"] <= 1.0
    assert "one_nn_error" not in evaluate_embedding(DataMatrix(Y), Y)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
