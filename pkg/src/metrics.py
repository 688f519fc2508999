"""
Metrics Module
Evaluation of embeddings and runs: relative gradient and cost error, 1-NN
error, neighborhood precision/recall, run-time order estimates and timing
statistics.
"""

import logging
import math
import warnings

import numpy as np
from scipy.spatial.distance import cdist

from src.affinity import knn
from src.config import METRICS_CONFIG
from src.embedding_model import (DataMatrix, Phase, PrecisionRecallCurve,
                                 ScalingEstimate)
from src.geometry import PROJECTION_EPS, check_interior, hyperbolic_distance, norm_sq

logger = logging.getLogger(__name__)


def sample_schedule(phase):
    """Iterations (within a phase) at which costs and gradient errors are sampled"""
    if Phase(phase) is Phase.EXAGGERATION:
        return frozenset(METRICS_CONFIG["exaggeration_schedule"])
    return frozenset(METRICS_CONFIG["main_schedule"])


def is_sample_iteration(phase, iteration):
    return iteration in sample_schedule(phase)


def _clamp_into_disk(vectors):
    """Scale vectors with norm >= 1 to norm 1 - eps; report whether any was moved"""
    norms = np.sqrt(norm_sq(vectors))
    outside = norms >= 1.0
    if not np.any(outside):
        return vectors, False
    scale = np.where(outside, (1.0 - PROJECTION_EPS) / np.where(outside, norms, 1.0), 1.0)
    return vectors * scale[:, None], True


def relative_gradient_error(exact, approx, return_clamped=False):
    """
    sqrt(sum_i d(g_i, g'_i)^2) / sqrt(sum_i d(0, g_i)^2) with gradient
    vectors read as disk points.

    Vectors outside the disk are clamped to norm 1 - eps and a warning is
    emitted; pass return_clamped=True to receive the flag as well.

    Returns:
        float: the error, or nan when the exact field is zero
    """
    g = np.atleast_2d(np.asarray(exact, dtype=np.float64))
    h = np.atleast_2d(np.asarray(approx, dtype=np.float64))
    if g.shape != h.shape:
        raise ValueError(f"gradient fields differ in shape: {g.shape} vs {h.shape}")

    g, clamped_g = _clamp_into_disk(g)
    h, clamped_h = _clamp_into_disk(h)
    clamped = clamped_g or clamped_h
    if clamped:
        message = "Gradient vectors clamped into the disk for the error metric"
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)

    denominator = math.sqrt(float(np.sum(hyperbolic_distance(np.zeros_like(g), g) ** 2)))
    if denominator == 0.0:
        value = math.nan
    else:
        value = math.sqrt(float(np.sum(hyperbolic_distance(g, h) ** 2))) / denominator
    return (value, clamped) if return_clamped else value


def relative_cost_error(cost_exact, cost_approx):
    """|C - C'| / C, nan when C is zero"""
    if cost_exact == 0:
        return math.nan
    return abs(cost_exact - cost_approx) / abs(cost_exact)


def _hyperbolic_order(Y, k, chunk):
    """
    k nearest neighbors under d^H, self excluded, ties by lower index.

    d^H is increasing in |a - b|^2 / (1 - |b|^2) for a fixed query a.
    """
    n = Y.shape[0]
    inv_beta = 1.0 / (1.0 - norm_sq(Y))
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        ratio = cdist(Y[start:stop], Y, metric="sqeuclidean") * inv_beta[None, :]
        rows = np.arange(stop - start)
        ratio[rows, rows + start] = np.inf
        if k == 1:
            out[start:stop, 0] = np.argmin(ratio, axis=1)
        else:
            out[start:stop] = np.argsort(ratio, axis=1, kind="stable")[:, :k]
    return out


def hyperbolic_knn(embedding, k):
    """Indices of the k nearest embedded neighbors per point"""
    Y = np.asarray(embedding, dtype=np.float64)
    check_interior(Y, "embedding point")
    if not 0 < k < Y.shape[0]:
        raise ValueError(f"k must lie in [1, {Y.shape[0] - 1}], got {k}")
    return _hyperbolic_order(Y, k, METRICS_CONFIG["knn_chunk"])


def one_nn_error(embedding, labels):
    """
    Fraction of points whose nearest embedded neighbor has a different label.

    Args:
        embedding: (n, 2) Poincare points, n >= 2
        labels: (n,) class labels

    Returns:
        float: mismatch fraction in [0, 1]
    """
    Y = np.asarray(embedding, dtype=np.float64)
    labels = np.asarray(labels)
    if Y.shape[0] < 2:
        raise ValueError("one_nn_error needs at least two points")
    if labels.shape[0] != Y.shape[0]:
        raise ValueError("label count does not match the embedding")
    nearest = hyperbolic_knn(Y, 1)[:, 0]
    return float(np.mean(labels[nearest] != labels))


def precision_recall(data_hd, embedding, k_max=None):
    """
    Neighborhood precision and recall for k = 1..k_max.

    TP_k counts the high-dimensional k_max-neighbors of a point among its k
    nearest embedded neighbors; PR_k = TP_k / k and RC_k = TP_k / k_max,
    averaged over points.

    Args:
        data_hd (DataMatrix): High-dimensional representation
        embedding: (n, 2) Poincare points
        k_max (int): Neighborhood size, below n (default 30)

    Returns:
        PrecisionRecallCurve
    """
    k_max = METRICS_CONFIG["k_max"] if k_max is None else int(k_max)
    if not isinstance(data_hd, DataMatrix):
        data_hd = DataMatrix(data_hd)
    Y = np.asarray(embedding, dtype=np.float64)
    if Y.shape[0] != data_hd.n_points:
        raise ValueError("embedding and data differ in point count")
    if not 0 < k_max < Y.shape[0]:
        raise ValueError(f"k_max must lie in [1, {Y.shape[0] - 1}], got {k_max}")

    high = knn(data_hd, k_max).indices
    low = hyperbolic_knn(Y, k_max)

    chunk = METRICS_CONFIG["knn_chunk"]
    true_positives = np.zeros(k_max)
    for start in range(0, Y.shape[0], chunk):
        stop = min(start + chunk, Y.shape[0])
        hits = (low[start:stop, :, None] == high[start:stop, None, :]).any(axis=2)
        true_positives += np.cumsum(hits, axis=1).sum(axis=0)
    true_positives /= Y.shape[0]

    ks = np.arange(1, k_max + 1)
    return PrecisionRecallCurve(k_max=k_max,
                                precision=true_positives / ks,
                                recall=true_positives / k_max)


def estimate_alpha(sizes, times):
    """
    Pairwise growth exponents alpha = dlog t / dlog n between consecutive sizes.

    Args:
        sizes (list): Strictly increasing problem sizes
        times (list): Positive mean iteration times

    Returns:
        ScalingEstimate
    """
    sizes = [int(s) for s in sizes]
    times = [float(t) for t in times]
    if len(sizes) < 2 or len(sizes) != len(times):
        raise ValueError("estimate_alpha needs at least two (size, time) pairs")
    if any(t <= 0 for t in times):
        raise ValueError("times must be positive")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")

    alphas = [
        (math.log(t1) - math.log(t0)) / (math.log(n1) - math.log(n0))
        for (n0, t0), (n1, t1) in zip(zip(sizes, times), zip(sizes[1:], times[1:]))
    ]
    return ScalingEstimate(sizes=sizes, mean_iter_times=times, alphas=alphas)


def timing_summary(seconds):
    """min/avg/std/max of per-iteration wall times"""
    seconds = np.asarray(seconds, dtype=np.float64)
    if seconds.size == 0:
        return {"count": 0}
    return {
        "count": int(seconds.size),
        "min": float(seconds.min()),
        "avg": float(seconds.mean()),
        "std": float(seconds.std()),
        "max": float(seconds.max()),
    }


def run_timing(report):
    """Pooled and per-phase timing tables of a RunReport"""
    return {
        "pooled": timing_summary(report.iteration_seconds()),
        Phase.EXAGGERATION.value: timing_summary(report.iteration_seconds(Phase.EXAGGERATION)),
        Phase.MAIN.value: timing_summary(report.iteration_seconds(Phase.MAIN)),
    }


def evaluate_embedding(data_hd, embedding, labels=None, k_max=None):
    """
    Quality metrics of a final embedding.

    Returns:
        dict: one_nn_error (when labels are given), precision_recall and
        mean_precision; k_max is lowered to n - 1 on tiny inputs
    """
    Y = np.asarray(embedding, dtype=np.float64)
    k_max = METRICS_CONFIG["k_max"] if k_max is None else int(k_max)
    k_max = min(k_max, Y.shape[0] - 1)

    results = {}
    if labels is not None:
        results["one_nn_error"] = one_nn_error(Y, labels)
    curve = precision_recall(data_hd, Y, k_max)
    results["precision_recall"] = curve.to_dict()
    results["mean_precision"] = curve.mean_precision()
    return results
