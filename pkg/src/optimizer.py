"""
Optimizer Module
Riemannian gradient descent on the Poincare disk with momentum and gains,
early exaggeration, the n/12000 learning rate, the boundary stop, and the
iteration loop that ties tree rebuild, gradient, step and projection together.
"""

import logging
import platform
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numba
import numpy as np

from src import __version__
from src.affinity import build_affinities
from src.config import OPTIMIZER_CONFIG
from src.embedding_model import (GradientField, IterationRecord,
                                 OptimizationError, OptimizerConfig,
                                 OptimizerState, Phase, RunReport, StopReason,
                                 TraversalStats)
from src.geometry import exp_map, metric_factor, project_to_disk
from src.metrics import (evaluate_embedding, relative_gradient_error,
                         run_timing, sample_schedule)
from src.objective import (compile_kernels, gradient_accelerated,
                           gradient_exact, kl_cost)
from src.quadtree import PolarQuadtree

logger = logging.getLogger(__name__)


@dataclass
class StepInfo:
    """Side products of one optimizer step"""
    gradient: GradientField
    stats: Optional[TraversalStats]
    previous: np.ndarray       # embedding the gradient was evaluated at
    exaggeration: float


def initialize(data_2d, seed=0, scale=None, jitter=None):
    """
    Starting state from the first two principal components.

    Args:
        data_2d: (n, >=2) PCA scores; the first two columns are used
        seed (int): Seed for the degenerate-data jitter
        scale (float): Target max Euclidean norm (default 1e-3)
        jitter (float): Jitter magnitude when all rows coincide (default 1e-5)

    Returns:
        OptimizerState: velocities zero, gains one
    """
    scale = OPTIMIZER_CONFIG["init_scale"] if scale is None else scale
    jitter = OPTIMIZER_CONFIG["init_jitter"] if jitter is None else jitter

    scores = np.asarray(getattr(data_2d, "values", data_2d), dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 2:
        raise ValueError(f"initialize needs an (n, k) matrix with n >= 2, got {scores.shape}")
    Y = np.zeros((scores.shape[0], 2))
    cols = min(2, scores.shape[1])
    Y[:, :cols] = scores[:, :cols]

    max_norm = float(np.sqrt(np.max(np.einsum("ij,ij->i", Y, Y))))
    if max_norm > 0.0:
        Y *= scale / max_norm
    else:
        logger.warning("Degenerate initialization: all points coincide, adding jitter")
        rng = np.random.default_rng(seed)
        Y = jitter * rng.uniform(-1.0, 1.0, size=Y.shape)

    return OptimizerState(embedding=Y, velocity=np.zeros_like(Y), gains=np.ones_like(Y))


def compute_gradient(P, embedding, config, exaggeration=1.0):
    """
    Gradient field for the current embedding.

    exact_mode and theta = 0 use the exact kernel; otherwise the polar
    quadtree is rebuilt on the embedding and traversed.
    """
    if config.exact_mode or config.theta == 0:
        return gradient_exact(P, embedding, exaggeration), None
    tree = PolarQuadtree(embedding, rule=config.split_rule, max_depth=config.max_depth)
    return gradient_accelerated(P, embedding, tree, config.theta, exaggeration)


def _diagnostics(state, field, phase):
    bad = ~np.isfinite(field.vectors).all(axis=1)
    return {
        "iteration": state.iteration,
        "phase": phase.value,
        "non_finite_points": int(bad.sum()),
        "first_bad_index": int(np.argmax(bad)) if bad.any() else None,
        "z": field.z,
        "max_norm": state.max_norm(),
    }


def step(state, P, config, learning_rate=None):
    """
    One descent iteration.

    The gradient uses factor * P during the exaggeration phase. The direction
    -grad / lambda is scaled per coordinate by the gains, folded into the
    velocity, applied through the exponential map, and the result is
    projected back inside the disk.

    Args:
        state (OptimizerState): Current iterate
        P (SparseAffinities): Affinities
        config (OptimizerConfig): Run settings
        learning_rate (float): Step size (default config.resolved_learning_rate(n))

    Returns:
        tuple: (new OptimizerState, StepInfo)

    Raises:
        OptimizationError: the gradient has non-finite entries
    """
    phase = state.phase
    early = phase is Phase.EXAGGERATION
    exaggeration = config.exaggeration_factor if early else 1.0
    momentum = config.momentum_early if early else config.momentum_late
    eta = config.resolved_learning_rate(state.n_points) if learning_rate is None else learning_rate

    Y = state.embedding
    field, stats = compute_gradient(P, Y, config, exaggeration)
    if not field.is_finite():
        diagnostics = _diagnostics(state, field, phase)
        logger.error(f"Non-finite gradient: {diagnostics}")
        raise OptimizationError(f"Non-finite gradient at iteration {state.iteration}", diagnostics)

    grad = field.vectors
    direction = -grad / metric_factor(Y)[:, None]

    gains = state.gains
    if config.use_gains:
        # delta-bar-delta: grow where the velocity still points downhill
        downhill = state.velocity * grad < 0.0
        gains = np.where(downhill, gains + OPTIMIZER_CONFIG["gain_increment"],
                         gains * OPTIMIZER_CONFIG["gain_decay"])
        gains = np.maximum(gains, config.min_gain)

    velocity = momentum * state.velocity + eta * gains * direction
    moved = project_to_disk(exp_map(Y, velocity), config.projection_eps)

    new_state = OptimizerState(moved, velocity, gains, state.iteration + 1, phase)
    return new_state, StepInfo(field, stats, Y, exaggeration)


def environment_stamp():
    """Thread count and library versions for the report"""
    return {
        "threads": int(numba.get_num_threads()),
        "build": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
        "platform": platform.platform(),
    }


def run(data, config=None, P=None, reduced=None, evaluate=True,
        callback: Optional[Callable] = None):
    """
    Embed a dataset.

    Runs config.exaggeration_iters exaggerated steps, then up to
    config.max_iters main steps, stopping early once any point reaches norm
    1 - config.stop_boundary_eps. Affinity construction, sampling and final
    metrics are excluded from the per-iteration timings.

    Args:
        data (DataMatrix): Input data
        config (OptimizerConfig): Run settings
        P (SparseAffinities): Precomputed affinities (built when None)
        reduced (DataMatrix): PCA representation matching P
        evaluate (bool): Compute final quality metrics
        callback (callable): Called with (state, record) after every iteration

    Returns:
        tuple: (final (n, 2) embedding, RunReport)

    Raises:
        OptimizationError: a step produced a non-finite gradient; the partial
            report is attached as error.report
    """
    config = OptimizerConfig() if config is None else config
    config.validate()

    if P is None or reduced is None:
        P, reduced = build_affinities(data, config.perplexity)
    compile_kernels()

    state = initialize(reduced.values, seed=config.seed)
    eta = config.resolved_learning_rate(state.n_points)
    accelerated = not (config.exact_mode or config.theta == 0)
    report = RunReport(config={**config.to_dict(), "learning_rate": eta, "n_points": state.n_points},
                       environment=environment_stamp())
    logger.info(f"Embedding {state.n_points} points: eta={eta:.4g}, theta={config.theta}, "
                f"{'accelerated' if accelerated else 'exact'}, split={config.split_rule.value}")

    gradient_errors = []
    stop = StopReason.MAX_ITERS
    phases = [(Phase.EXAGGERATION, config.exaggeration_iters), (Phase.MAIN, config.max_iters)]

    try:
        for phase, n_iters in phases:
            state.phase = phase
            schedule = sample_schedule(phase)
            for k in range(n_iters):
                started = time.perf_counter()
                state, info = step(state, P, config, eta)
                seconds = time.perf_counter() - started

                record = IterationRecord(iteration=state.iteration - 1, phase=phase,
                                         seconds=seconds, max_norm=state.max_norm())
                if info.stats is not None:
                    record.visits_per_point = info.stats.visits_per_point
                if k in schedule:
                    if config.sample_costs:
                        record.cost = kl_cost(P, state.embedding)
                    if config.sample_gradient_errors and accelerated:
                        reference = gradient_exact(P, info.previous, info.exaggeration)
                        record.gradient_error = relative_gradient_error(reference, info.gradient)
                        gradient_errors.append(record.gradient_error)
                report.iterations.append(record)

                level = logging.INFO if state.iteration % config.log_every == 0 else logging.DEBUG
                logger.log(level, f"[{phase.value}] iter {record.iteration}: {seconds * 1e3:.2f} ms, "
                                  f"max norm {record.max_norm:.6f}"
                                  + (f", cost {record.cost:.5f}" if record.cost is not None else ""))
                if callback is not None:
                    callback(state, record)

                if record.max_norm >= 1.0 - config.stop_boundary_eps:
                    stop = StopReason.BOUNDARY
                    logger.info(f"Boundary reached at iteration {record.iteration}; stopping")
                    break
            if stop is StopReason.BOUNDARY:
                break
    except OptimizationError as error:
        report.stop_reason = StopReason.ERROR
        report.timing = run_timing(report)
        error.report = report
        raise

    report.stop_reason = stop
    report.timing = run_timing(report)
    if gradient_errors:
        report.final_metrics["mean_gradient_error"] = float(np.nanmean(gradient_errors))

    if evaluate:
        report.final_metrics["cost"] = kl_cost(P, state.embedding)
        report.final_metrics.update(evaluate_embedding(reduced, state.embedding, data.labels))

    return state.embedding, report
