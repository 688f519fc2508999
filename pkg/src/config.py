"""
Configuration module for hyperbolic t-SNE
Centralized settings for data paths, optimizer defaults, and benchmark plans
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent

# Pick up HYPTSNE_THREADS and friends from a local .env, if present
load_dotenv(PROJECT_ROOT / ".env")

# Data paths
DATA_DIR = PROJECT_ROOT / "data"
DEMO_DATASET = DATA_DIR / "demo_60.csv"
SCHEMA_DIR = PROJECT_ROOT / "schemas"
REPORT_SCHEMA = SCHEMA_DIR / "run_report.schema.json"

THREADS_ENV_VAR = "HYPTSNE_THREADS"

# High-dimensional affinities
AFFINITY_CONFIG = {
    "pca_dims": 50,
    "neighbor_factor": 3,          # k = floor(3 * perplexity)
    "perplexity_tol": 1e-5,
    "max_bisection_steps": 200,
    "log_sigma_bounds": (-50.0, 50.0),
    "brute_force_max_n": 5000,
    "brute_force_chunk": 256,
}

# Polar quadtree
QUADTREE_CONFIG = {
    "max_depth": 50,
    "split_rule": "equal-length",
    "initial_capacity_factor": 8,
}

# Optimizer defaults
OPTIMIZER_CONFIG = {
    "perplexity": 30.0,
    "theta": 0.5,
    "exaggeration_factor": 12.0,
    "exaggeration_iters": 250,
    "max_iters": 750,
    "momentum_early": 0.5,
    "momentum_late": 0.8,
    "learning_rate_divisor": 12.0 * 1000.0,   # eta = n / (12 * 1000)
    "stop_boundary_eps": 1e-4,
    "projection_eps": 1e-5,
    "min_gain": 0.01,
    "gain_increment": 0.2,
    "gain_decay": 0.8,
    "init_scale": 1e-3,
    "init_jitter": 1e-5,
    "log_every": 50,
}

# Evaluation
METRICS_CONFIG = {
    "k_max": 30,
    "exaggeration_schedule": (0, 50, 100, 150, 200, 249),
    "main_schedule": tuple(range(0, 750, 50)) + (749,),
    "q_floor": 1e-12,
    "knn_chunk": 512,
}

# Benchmark protocol
BENCHMARK_CONFIG = {
    "fractions": tuple(round(0.1 * i, 1) for i in range(1, 11)),
    "repeats": 5,
    "thetas": tuple(round(0.1 * i, 1) for i in range(0, 11)),
    "split_rules": ("equal-length", "equal-area"),
    "exact_max_n": 20000,
    "seed_base": 0,
}

# Output config
OUTPUT_CONFIG = {
    "output_dir": PROJECT_ROOT / "output",
    "embedding_csv": "embedding.csv",
    "report_json": "report.json",
    "report_txt": "report.txt",
    "embedding_svg": "embedding.svg",
    "scaling_csv": "scaling.csv",
    "scaling_svg": "scaling.svg",
    "alphas_csv": "alphas.csv",
    "errors_csv": "errors.csv",
    "theta_sweep_csv": "theta_sweep.csv",
    "summary_json": "summary.json",
    "precision_recall_svg": "precision_recall.svg",
}

LOGGING_CONFIG = {
    "level": "INFO",
    "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
}

# Run presets for the embed command
RUN_PRESETS = {
    "exact": {
        "exact_mode": True,
        "focus": "O(n^2) reference gradient, small data only"
    },
    "accelerated": {
        "exact_mode": False,
        "theta": 0.5,
        "focus": "Polar quadtree with the default opening angle"
    },
    "fast": {
        "exact_mode": False,
        "theta": 1.0,
        "focus": "Aggressive culling, quick previews"
    }
}


def get_thread_count(requested=None):
    """
    Resolve the worker thread count.

    Args:
        requested (int): Explicit --threads value, or None

    Returns:
        int: Thread count (>= 1)
    """
    if requested is not None:
        return max(int(requested), 1)

    env_value = os.environ.get(THREADS_ENV_VAR)
    if env_value:
        try:
            return max(int(env_value), 1)
        except ValueError:
            pass
    return 1


def get_output_dir():
    """Get the output directory path"""
    return str(OUTPUT_CONFIG["output_dir"])


def validate_config():
    """Validate configuration"""
    errors = []

    if not DEMO_DATASET.exists():
        errors.append(f"Demo dataset not found: {DEMO_DATASET}")

    if not REPORT_SCHEMA.exists():
        errors.append(f"Report schema not found: {REPORT_SCHEMA}")

    if OPTIMIZER_CONFIG["projection_eps"] >= OPTIMIZER_CONFIG["stop_boundary_eps"]:
        errors.append("projection_eps must be below stop_boundary_eps")

    if QUADTREE_CONFIG["split_rule"] not in BENCHMARK_CONFIG["split_rules"]:
        errors.append(f"Unknown split rule: {QUADTREE_CONFIG['split_rule']}")

    return errors


if __name__ == "__main__":
    print("Configuration Loaded")
    print(f"Project Root: {PROJECT_ROOT}")
    print(f"Demo Dataset: {DEMO_DATASET}")
    print(f"Threads: {get_thread_count()}")

    errors = validate_config()
    if errors:
        print("\nConfiguration Errors:")
        for error in errors:
            print(f"  - {error}")
    else:
        print("\n✓ Configuration validated successfully")
