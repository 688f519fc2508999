"""
Utility module for hyperbolic t-SNE
Atomic artifact writers, export helpers and console reporting
"""

import json
import math
import os
import tempfile
from datetime import datetime
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd


def json_safe(value):
    """Recursively convert numpy scalars/arrays and enums to JSON types; non-finite floats become None"""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_atomic(path, text):
    """
    Write text to path through a temp file in the same directory and a rename.

    Args:
        path (str): Destination
        text (str): Content

    Returns:
        str: Path written
    """
    output_file = Path(path)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=output_file.parent, prefix=f".{output_file.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, output_file)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return str(output_file)


def write_json(data, path):
    return write_atomic(path, json.dumps(json_safe(data), indent=2, sort_keys=False) + "\n")


def write_csv(frame, path):
    return write_atomic(path, frame.to_csv(index=False, float_format="%.17g"))


def export_embedding_csv(embedding, labels=None, output_path="output/embedding.csv"):
    """
    Export the embedding with columns index, x, y and label when available.

    Args:
        embedding (ndarray): (n, 2) Poincare coordinates
        labels (ndarray): Optional labels
        output_path (str): Path to save CSV file
    """
    Y = np.asarray(embedding, dtype=np.float64)
    frame = pd.DataFrame({"index": np.arange(Y.shape[0]), "x": Y[:, 0], "y": Y[:, 1]})
    if labels is not None:
        frame["label"] = np.asarray(labels)
    return write_csv(frame, output_path)


def export_report_json(report, output_path="output/report.json"):
    """Export a RunReport to JSON"""
    return write_json(report.to_dict(), output_path)


def _fmt(value, pattern=".4g"):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "n/a"
    return format(value, pattern)


def generate_report_text(report):
    """
    Generate a text report of a run.

    Args:
        report (RunReport): Finished run

    Returns:
        str: Formatted report text
    """
    config = report.config
    metrics = report.final_metrics
    lines = []
    lines.append("=" * 80)
    lines.append("HYPERBOLIC T-SNE - RUN REPORT")
    lines.append("=" * 80)
    lines.append(f"\nGenerated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    lines.append("\n" + "-" * 80)
    lines.append("CONFIGURATION")
    lines.append("-" * 80)
    mode = "exact" if config.get("exact_mode") else f"accelerated (theta={config.get('theta')})"
    lines.append(f"Points: {config.get('n_points')}")
    lines.append(f"Gradient: {mode}, split rule {config.get('split_rule')}")
    lines.append(f"Perplexity: {config.get('perplexity')}  Learning rate: {_fmt(config.get('learning_rate'))}")
    lines.append(f"Iterations: {len(report.iterations)} "
                 f"(exaggeration {config.get('exaggeration_iters')}, main up to {config.get('max_iters')})")
    lines.append(f"Stop reason: {report.stop_reason.value}")

    lines.append("\n" + "-" * 80)
    lines.append("ITERATION TIMES (seconds)")
    lines.append("-" * 80)
    lines.append(f"  {'phase':<14}{'count':>7}{'min':>12}{'avg':>12}{'std':>12}{'max':>12}")
    for phase, row in report.timing.items():
        if not row.get("count"):
            continue
        lines.append(f"  {phase:<14}{row['count']:>7}{_fmt(row['min']):>12}{_fmt(row['avg']):>12}"
                     f"{_fmt(row['std']):>12}{_fmt(row['max']):>12}")

    lines.append("\n" + "-" * 80)
    lines.append("QUALITY")
    lines.append("-" * 80)
    lines.append(f"KL cost: {_fmt(metrics.get('cost'), '.6f')}")
    if "one_nn_error" in metrics:
        lines.append(f"1-NN error: {metrics['one_nn_error'] * 100:.2f}%")
    if "mean_precision" in metrics:
        lines.append(f"Mean precision (k <= {metrics['precision_recall']['k_max']}): "
                     f"{_fmt(metrics['mean_precision'], '.4f')}")
    if "mean_gradient_error" in metrics:
        lines.append(f"Mean relative gradient error: {_fmt(metrics['mean_gradient_error'], '.3e')}")

    if report.baseline:
        lines.append("\n" + "-" * 80)
        lines.append("EXACT BASELINE")
        lines.append("-" * 80)
        lines.append(f"Baseline KL cost: {_fmt(report.baseline.get('cost'), '.6f')}")
        lines.append(f"Relative cost error: {_fmt(report.baseline.get('relative_cost_error'), '.3e')}")
        lines.append(f"Speedup (avg iteration): {_fmt(report.baseline.get('speedup'), '.2f')}x")

    lines.append("\n" + "=" * 80)
    return "\n".join(lines)


def print_run_summary(report):
    """
    Print a formatted summary of a run.

    Args:
        report (RunReport): Finished run
    """
    print("\n" + "=" * 80)
    print("RUN SUMMARY")
    print("=" * 80)

    pooled = report.timing.get("pooled", {})
    if pooled.get("count"):
        print(f"\nIterations: {pooled['count']}  avg {pooled['avg'] * 1e3:.2f} ms  "
              f"stop: {report.stop_reason.value}")

    curve = report.final_metrics.get("precision_recall")
    if curve:
        print(f"\nPrecision by neighborhood size (k_max={curve['k_max']}):")
        for k in sorted({k for k in (1, 5, 10, 20) if k < curve["k_max"]} | {curve["k_max"]}):
            value = curve["precision"][k - 1]
            bar = "█" * int(value * 30) + "░" * (30 - int(value * 30))
            print(f"  k={k:<4} {bar} {value:.3f}")

    if "one_nn_error" in report.final_metrics:
        print(f"\n1-NN error: {report.final_metrics['one_nn_error'] * 100:.2f}%")

    print("\n" + "=" * 80)
