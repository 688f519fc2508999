"""
Benchmark Module
Scaling sweeps over subsample sizes, exact vs. accelerated timing per split
rule, growth-exponent estimates, the theta quality sweep and the gradient/cost
error study against exact runs.
"""

import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from src.affinity import build_affinities
from src.config import OUTPUT_CONFIG
from src.embedding_model import (ExperimentPlan, OptimizerConfig,
                                 PrecisionRecallCurve)
from src.load_data import load_dataset
from src.metrics import estimate_alpha, relative_cost_error
from src.objective import kl_cost
from src.optimizer import run
from src.preprocess import subsample_indices
from src.synthetic import generate
from src.utils import write_csv, write_json
from src.visualization import plot_precision_recall, plot_scaling

logger = logging.getLogger(__name__)

EXACT = "exact"


def method_name(rule):
    return f"accelerated-{rule.value}"


def load_plan_data(plan):
    """Dataset named by the plan, or its synthetic generator"""
    if plan.dataset_path:
        return load_dataset(plan.dataset_path, plan.dataset_format)
    return generate(plan.synthetic, plan.synthetic_n, seed=plan.seed_base)


def _config(plan, **overrides):
    settings = dict(
        perplexity=plan.perplexity,
        theta=plan.theta,
        exaggeration_iters=plan.exaggeration_iters,
        max_iters=plan.max_iters,
        seed=plan.seed_base,
    )
    settings.update(overrides)
    return OptimizerConfig(**settings)


def _timed_run(data, config, P, reduced, evaluate=False):
    embedding, report = run(data, config, P=P, reduced=reduced, evaluate=evaluate)
    pooled = report.timing["pooled"]
    return embedding, report, pooled.get("avg", math.nan)


def scaling_sweep(plan, data):
    """
    Time exact and accelerated runs on seed-deterministic subsamples.

    Returns:
        DataFrame: one row per timed run (size, run, method, split_rule,
        mean_iter_seconds, iterations, stop_reason, status, error)
    """
    rows = []
    n = data.n_points
    for fraction in plan.fractions:
        for repeat in range(plan.repeats):
            seed = plan.seed_base + repeat
            indices = subsample_indices(n, fraction, seed)
            sample = data.subset(indices)
            size = sample.n_points
            try:
                P, reduced = build_affinities(sample, plan.perplexity)
            except Exception as error:
                logger.error(f"Affinities failed for n={size}, run {repeat}: {error}")
                rows.append(dict(size=size, run=repeat, method="affinities", split_rule=None,
                                 mean_iter_seconds=math.nan, iterations=0, stop_reason=None,
                                 status="failed", error=str(error)))
                continue

            cells = []
            if plan.include_exact:
                cells.append((EXACT, None, dict(exact_mode=True)))
            for rule in plan.split_rules:
                cells.append((method_name(rule), rule, dict(split_rule=rule)))

            for method, rule, overrides in cells:
                row = dict(size=size, run=repeat, method=method,
                           split_rule=None if rule is None else rule.value,
                           mean_iter_seconds=math.nan, iterations=0, stop_reason=None,
                           status="ok", error="")
                if method == EXACT and size > plan.exact_max_n:
                    row["status"] = "skipped"
                    row["error"] = f"n={size} exceeds exact cap {plan.exact_max_n}"
                    rows.append(row)
                    continue
                try:
                    _, report, seconds = _timed_run(sample, _config(plan, seed=seed, **overrides), P, reduced)
                    row.update(mean_iter_seconds=seconds, iterations=len(report.iterations),
                               stop_reason=report.stop_reason.value)
                except Exception as error:
                    logger.error(f"{method} failed for n={size}, run {repeat}: {error}")
                    row.update(status="failed", error=str(error))
                rows.append(row)
                logger.info(f"n={size} run={repeat} {method}: {row['mean_iter_seconds']:.4g} s/iter")
    return pd.DataFrame(rows)


def alpha_table(scaling):
    """Growth exponents between consecutive sizes, per method"""
    rows = []
    ok = scaling[(scaling["status"] == "ok") & (scaling["mean_iter_seconds"] > 0)]
    for method, group in ok.groupby("method", sort=True):
        means = group.groupby("size")["mean_iter_seconds"].mean().sort_index()
        if len(means) < 2:
            continue
        estimate = estimate_alpha(list(means.index), list(means.values))
        for (n0, n1), alpha in zip(zip(estimate.sizes, estimate.sizes[1:]), estimate.alphas):
            rows.append(dict(method=method, size_from=n0, size_to=n1, alpha=alpha))
    return pd.DataFrame(rows, columns=["method", "size_from", "size_to", "alpha"])


def theta_sweep(plan, data):
    """
    Full-data runs per theta with quality metrics.

    Returns:
        tuple: (DataFrame of theta, mean_iter_seconds, cost, one_nn_error,
        mean_precision, status, error; dict theta -> PrecisionRecallCurve)
    """
    rows = []
    curves = {}
    P, reduced = build_affinities(data, plan.perplexity)
    for theta in plan.thetas:
        row = dict(theta=theta, mean_iter_seconds=math.nan, cost=math.nan,
                   one_nn_error=math.nan, mean_precision=math.nan, status="ok", error="")
        if theta == 0 and data.n_points > plan.exact_max_n:
            row.update(status="skipped", error="theta = 0 runs the exact gradient")
            rows.append(row)
            continue
        try:
            _, report, seconds = _timed_run(data, _config(plan, theta=theta), P, reduced, evaluate=True)
            metrics = report.final_metrics
            row.update(mean_iter_seconds=seconds, cost=metrics.get("cost", math.nan),
                       one_nn_error=metrics.get("one_nn_error", math.nan),
                       mean_precision=metrics.get("mean_precision", math.nan))
            pr = metrics["precision_recall"]
            curves[f"theta={theta:g}"] = PrecisionRecallCurve(
                pr["k_max"], np.asarray(pr["precision"]), np.asarray(pr["recall"]))
        except Exception as error:
            logger.error(f"theta={theta} failed: {error}")
            row.update(status="failed", error=str(error))
        rows.append(row)
    return pd.DataFrame(rows), curves


def error_study(plan, data):
    """
    Approximation error of the accelerated gradient against exact runs.

    For every subsample and run, one exact run is compared with one
    accelerated run per split rule from the same start: the relative gradient
    error is sampled on the metrics schedule and the relative cost error is
    taken on the final embeddings.

    Returns:
        DataFrame: size, run, method, split_rule, mean_gradient_error,
        n_samples, cost_exact, cost_accelerated, relative_cost_error, status, error
    """
    rows = []
    n = data.n_points
    for fraction in plan.fractions:
        for repeat in range(plan.repeats):
            seed = plan.seed_base + repeat
            sample = data.subset(subsample_indices(n, fraction, seed))
            size = sample.n_points
            base = dict(size=size, run=repeat, mean_gradient_error=math.nan, n_samples=0,
                        cost_exact=math.nan, cost_accelerated=math.nan,
                        relative_cost_error=math.nan, status="ok", error="")
            if size > plan.exact_max_n:
                for rule in plan.split_rules:
                    rows.append(dict(base, method=method_name(rule), split_rule=rule.value, status="skipped",
                                     error=f"n={size} exceeds exact cap {plan.exact_max_n}"))
                continue
            try:
                P, reduced = build_affinities(sample, plan.perplexity)
                exact_embedding, _ = run(sample, _config(plan, seed=seed, exact_mode=True),
                                         P=P, reduced=reduced, evaluate=False)
                cost_exact = kl_cost(P, exact_embedding)
            except Exception as error:
                logger.error(f"Exact baseline failed for n={size}, run {repeat}: {error}")
                for rule in plan.split_rules:
                    rows.append(dict(base, method=method_name(rule), split_rule=rule.value,
                                     status="failed", error=str(error)))
                continue

            for rule in plan.split_rules:
                row = dict(base, method=method_name(rule), split_rule=rule.value, cost_exact=cost_exact)
                try:
                    config = _config(plan, seed=seed, split_rule=rule, sample_gradient_errors=True)
                    embedding, report = run(sample, config, P=P, reduced=reduced, evaluate=False)
                    cost = kl_cost(P, embedding)
                    sampled = [r.gradient_error for r in report.iterations if r.gradient_error is not None]
                    row.update(mean_gradient_error=report.final_metrics.get("mean_gradient_error", math.nan),
                               n_samples=len(sampled), cost_accelerated=cost,
                               relative_cost_error=relative_cost_error(cost_exact, cost))
                except Exception as error:
                    logger.error(f"{row['method']} error run failed for n={size}, run {repeat}: {error}")
                    row.update(status="failed", error=str(error))
                rows.append(row)
                logger.info(f"n={size} run={repeat} {row['method']}: gradient error "
                            f"{row['mean_gradient_error']:.3e}, cost error {row['relative_cost_error']:.3e}")
    return pd.DataFrame(rows)


def error_summary(errors):
    """Mean gradient and cost errors per method over the successful runs"""
    ok = errors[errors["status"] == "ok"]
    summary = {}
    for method, group in ok.groupby("method", sort=True):
        summary[method] = {
            "mean_gradient_error": float(group["mean_gradient_error"].mean()),
            "mean_relative_cost_error": float(group["relative_cost_error"].mean()),
            "runs": int(len(group)),
        }
    return summary


def summarize(scaling, alphas, sweep):
    """Speedups, split-rule comparison and growth-exponent means"""
    ok = scaling[scaling["status"] == "ok"]
    means = ok.groupby(["method", "size"])["mean_iter_seconds"].mean()

    speedups = {}
    if EXACT in means.index.get_level_values(0):
        exact = means.loc[EXACT]
        for method in means.index.get_level_values(0).unique():
            if method == EXACT:
                continue
            ratio = (exact / means.loc[method]).dropna()
            speedups[method] = {int(size): float(value) for size, value in ratio.items()}

    split_rules = {}
    rule_means = ok[ok["split_rule"].notna()].groupby("split_rule")["mean_iter_seconds"].mean()
    for rule, value in rule_means.items():
        split_rules[rule] = float(value)
    if {"equal-length", "equal-area"} <= set(split_rules):
        area = split_rules["equal-area"]
        split_rules["reduction_percent"] = 100.0 * (area - split_rules["equal-length"]) / area

    return {
        "speedups": speedups,
        "split_rules": split_rules,
        "mean_alpha": {m: float(g["alpha"].mean()) for m, g in alphas.groupby("method")},
        "failures": int((scaling["status"] == "failed").sum()
                        + (0 if sweep is None else (sweep["status"] == "failed").sum())),
        "timed_runs": int(len(ok)),
    }


def cmd_benchmark(plan, output_dir, run_theta_sweep=True):
    """
    Run an experiment plan and write its artifacts.

    Writes scaling.csv, alphas.csv, theta_sweep.csv, errors.csv (when the
    plan asks for the error study), summary.json and the
    scaling and precision/recall figures into output_dir.

    Returns:
        dict: summary
    """
    plan.validate()
    output_dir = Path(output_dir)
    data = load_plan_data(plan)
    logger.info(f"Benchmark on {data!r}: fractions={plan.fractions}, repeats={plan.repeats}")

    scaling = scaling_sweep(plan, data)
    write_csv(scaling, output_dir / OUTPUT_CONFIG["scaling_csv"])
    alphas = alpha_table(scaling)
    write_csv(alphas, output_dir / OUTPUT_CONFIG["alphas_csv"])
    if (scaling["status"] == "ok").any():
        plot_scaling(scaling[scaling["status"] == "ok"], output_dir / OUTPUT_CONFIG["scaling_svg"])

    sweep = None
    if run_theta_sweep and plan.thetas:
        sweep, curves = theta_sweep(plan, data)
        write_csv(sweep, output_dir / OUTPUT_CONFIG["theta_sweep_csv"])
        if curves:
            plot_precision_recall(curves, output_dir / OUTPUT_CONFIG["precision_recall_svg"])

    errors = None
    if plan.error_study:
        errors = error_study(plan, data)
        write_csv(errors, output_dir / OUTPUT_CONFIG["errors_csv"])

    summary = summarize(scaling, alphas, sweep)
    if errors is not None:
        summary["errors"] = error_summary(errors)
        summary["failures"] += int((errors["status"] == "failed").sum())
    summary["plan"] = {
        "dataset": plan.dataset_path or f"synthetic:{plan.synthetic}",
        "n_points": data.n_points,
        "fractions": list(plan.fractions),
        "repeats": plan.repeats,
        "thetas": list(plan.thetas),
        "split_rules": [r.value for r in plan.split_rules],
        "include_exact": plan.include_exact,
        "error_study": plan.error_study,
        "seed_base": plan.seed_base,
    }
    write_json(summary, output_dir / OUTPUT_CONFIG["summary_json"])
    return summary
