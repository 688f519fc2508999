#!/usr/bin/env python3
"""
Command-line interface for hyperbolic t-SNE
Run: python -m src.cli_interface embed --input data.csv --svg
Or:  python -m src.cli_interface benchmark --fractions 0.5,1.0 --repeats 2

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numba

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.affinity import build_affinities  # noqa: E402
from src.benchmark import cmd_benchmark  # noqa: E402
from src.config import (BENCHMARK_CONFIG, DEMO_DATASET, LOGGING_CONFIG,  # noqa: E402
                        OPTIMIZER_CONFIG, OUTPUT_CONFIG, RUN_PRESETS,
                        get_output_dir, get_thread_count)
from src.embedding_model import (DatasetParseError, ExperimentPlan,  # noqa: E402
                                 OptimizationError, OptimizerConfig, SplitRule)
from src.load_data import load_dataset  # noqa: E402
from src.metrics import relative_cost_error  # noqa: E402
from src.optimizer import run  # noqa: E402
from src.quadtree import PolarQuadtree  # noqa: E402
from src.synthetic import generate  # noqa: E402
from src.utils import (export_embedding_csv, export_report_json,  # noqa: E402
                       generate_report_text, print_run_summary,
                       write_atomic)
from src.visualization import emit_svg  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    """Invalid flags or inputs"""


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser that reports bad flags as UsageError instead of exiting with 2"""

    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from error


def _split_list(text):
    try:
        return [SplitRule.parse(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"unknown split rule in '{text}'") from error


def configure_threads(requested=None):
    """Resolve --threads / HYPTSNE_THREADS and apply it to the compiled kernels"""
    threads = min(get_thread_count(requested), numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(threads)
    return threads


def build_parser():
    parser = ArgumentParser(prog="hyptsne", description="Hyperbolic t-SNE with a polar quadtree")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    commands = parser.add_subparsers(dest="command")

    embed = commands.add_parser("embed", help="Embed one dataset")
    embed.add_argument("--input", help=f"Dataset file (default: {DEMO_DATASET.name})")
    embed.add_argument("--format", choices=["csv", "binary"], help="Dataset format (default: by suffix)")
    embed.add_argument("--labels", help="Binary label sidecar (default: <input>.labels)")
    embed.add_argument("--synthetic", choices=["gaussian", "hierarchical"],
                       help="Embed a generated dataset instead of a file")
    embed.add_argument("--synthetic-n", type=int, default=2000)
    embed.add_argument("--output-dir", default=get_output_dir())
    embed.add_argument("--preset", choices=sorted(RUN_PRESETS), help="Named gradient mode")
    embed.add_argument("--perplexity", type=float, default=OPTIMIZER_CONFIG["perplexity"])
    embed.add_argument("--theta", type=float, default=OPTIMIZER_CONFIG["theta"])
    embed.add_argument("--split", type=SplitRule.parse, default=SplitRule.EQUAL_LENGTH,
                       help="equal-length or equal-area")
    embed.add_argument("--exact", action="store_true", help="Use the O(n^2) gradient")
    embed.add_argument("--with-exact-baseline", action="store_true",
                       help="Also run the exact gradient and report errors against it")
    embed.add_argument("--ex-iters", type=int, default=OPTIMIZER_CONFIG["exaggeration_iters"])
    embed.add_argument("--max-iters", type=int, default=OPTIMIZER_CONFIG["max_iters"])
    embed.add_argument("--learning-rate", type=float, help="Default: n / 12000")
    embed.add_argument("--seed", type=int, default=0)
    embed.add_argument("--threads", type=int)
    embed.add_argument("--exact-max-n", type=int, default=BENCHMARK_CONFIG["exact_max_n"],
                       help="Largest n allowed for exact runs")
    embed.add_argument("--svg", action="store_true", help="Write embedding.svg")
    embed.add_argument("--svg-tree", action="store_true", help="Draw the quadtree cells in the SVG")
    embed.set_defaults(handler=cmd_embed)

    bench = commands.add_parser("benchmark", help="Scaling and theta sweeps")
    bench.add_argument("--input", help="Dataset file (default: synthetic data)")
    bench.add_argument("--format", choices=["csv", "binary"], default=None)
    bench.add_argument("--synthetic", choices=["gaussian", "hierarchical"], default="hierarchical")
    bench.add_argument("--synthetic-n", type=int, default=2000)
    bench.add_argument("--output-dir", default=get_output_dir())
    bench.add_argument("--fractions", type=_float_list, default=list(BENCHMARK_CONFIG["fractions"]))
    bench.add_argument("--repeats", type=int, default=BENCHMARK_CONFIG["repeats"])
    bench.add_argument("--thetas", type=_float_list, default=list(BENCHMARK_CONFIG["thetas"]))
    bench.add_argument("--splits", type=_split_list,
                       default=[SplitRule.parse(r) for r in BENCHMARK_CONFIG["split_rules"]])
    bench.add_argument("--no-exact", action="store_true", help="Skip exact timings")
    bench.add_argument("--no-theta-sweep", action="store_true")
    bench.add_argument("--error-study", action="store_true",
                       help="Measure gradient and cost errors against exact runs (errors.csv)")
    bench.add_argument("--exact-max-n", type=int, default=BENCHMARK_CONFIG["exact_max_n"])
    bench.add_argument("--perplexity", type=float, default=OPTIMIZER_CONFIG["perplexity"])
    bench.add_argument("--theta", type=float, default=OPTIMIZER_CONFIG["theta"])
    bench.add_argument("--ex-iters", type=int, default=OPTIMIZER_CONFIG["exaggeration_iters"])
    bench.add_argument("--max-iters", type=int, default=OPTIMIZER_CONFIG["max_iters"])
    bench.add_argument("--seed", type=int, default=BENCHMARK_CONFIG["seed_base"])
    bench.add_argument("--threads", type=int)
    bench.set_defaults(handler=handle_benchmark)
    return parser


def config_from_args(args):
    config = OptimizerConfig(
        perplexity=args.perplexity,
        theta=args.theta,
        split_rule=args.split,
        exact_mode=args.exact,
        exaggeration_iters=args.ex_iters,
        max_iters=args.max_iters,
        learning_rate=args.learning_rate,
        seed=args.seed,
        sample_costs=True,
        sample_gradient_errors=args.with_exact_baseline,
    )
    if args.preset:
        preset = RUN_PRESETS[args.preset]
        config.exact_mode = preset["exact_mode"]
        config.theta = preset.get("theta", config.theta)
    try:
        config.validate()
    except ValueError as error:
        raise UsageError(str(error)) from error
    return config


def cmd_embed(args):
    """
    Embed a dataset and write embedding.csv, report.json, report.txt and
    optionally embedding.svg.

    Returns:
        int: exit code
    """
    threads = configure_threads(args.threads)
    config = config_from_args(args)
    if args.synthetic:
        if args.input:
            raise UsageError("--input and --synthetic are mutually exclusive")
        if args.synthetic_n < 2:
            raise UsageError(f"--synthetic-n must be >= 2, got {args.synthetic_n}")
        data = generate(args.synthetic, args.synthetic_n, seed=args.seed)
    else:
        data = load_dataset(args.input or DEMO_DATASET, args.format, args.labels)
    needs_exact = config.exact_mode or config.theta == 0 or args.with_exact_baseline
    if needs_exact and data.n_points > args.exact_max_n:
        raise UsageError(f"exact gradient requested for n={data.n_points} > --exact-max-n {args.exact_max_n}")

    output_dir = Path(args.output_dir)
    P, reduced = build_affinities(data, config.perplexity)
    try:
        embedding, report = run(data, config, P=P, reduced=reduced)
    except OptimizationError as error:
        partial = getattr(error, "report", None)
        if partial is not None:
            export_report_json(partial, output_dir / OUTPUT_CONFIG["report_json"])
        raise

    if args.with_exact_baseline and not config.exact_mode:
        baseline_config = OptimizerConfig(**{**config.to_dict(), "exact_mode": True,
                                             "sample_gradient_errors": False})
        _, baseline = run(data, baseline_config, P=P, reduced=reduced)
        exact_avg = baseline.timing["pooled"].get("avg")
        accel_avg = report.timing["pooled"].get("avg")
        report.baseline = {
            "cost": baseline.final_metrics.get("cost"),
            "one_nn_error": baseline.final_metrics.get("one_nn_error"),
            "mean_precision": baseline.final_metrics.get("mean_precision"),
            "stop_reason": baseline.stop_reason.value,
            "timing": baseline.timing,
            "relative_cost_error": relative_cost_error(baseline.final_metrics["cost"],
                                                       report.final_metrics["cost"]),
            "speedup": exact_avg / accel_avg if exact_avg and accel_avg else None,
        }

    report.environment["threads"] = threads
    written = [
        export_embedding_csv(embedding, data.labels, output_dir / OUTPUT_CONFIG["embedding_csv"]),
        export_report_json(report, output_dir / OUTPUT_CONFIG["report_json"]),
        write_atomic(output_dir / OUTPUT_CONFIG["report_txt"], generate_report_text(report)),
    ]
    if args.svg or args.svg_tree:
        tree = PolarQuadtree(embedding, rule=config.split_rule) if args.svg_tree else None
        written.append(emit_svg(embedding, data.labels, output_dir / OUTPUT_CONFIG["embedding_svg"], tree=tree))

    print_run_summary(report)
    for path in written:
        print(f"  wrote {path}")
    return EXIT_OK


def handle_benchmark(args):
    """Build an ExperimentPlan from flags and run it"""
    configure_threads(args.threads)
    plan = ExperimentPlan(
        dataset_path=args.input,
        dataset_format=args.format or "csv",
        synthetic=args.synthetic,
        synthetic_n=args.synthetic_n,
        fractions=args.fractions,
        repeats=args.repeats,
        thetas=[] if args.no_theta_sweep else args.thetas,
        split_rules=args.splits,
        include_exact=not args.no_exact,
        error_study=args.error_study,
        exact_max_n=args.exact_max_n,
        seed_base=args.seed,
        exaggeration_iters=args.ex_iters,
        max_iters=args.max_iters,
        theta=args.theta,
        perplexity=args.perplexity,
    )
    try:
        plan.validate()
    except ValueError as error:
        raise UsageError(str(error)) from error
    if args.input and args.format is None:
        plan.dataset_format = "csv" if args.input.lower().endswith(".csv") else "binary"

    summary = cmd_benchmark(plan, args.output_dir, run_theta_sweep=not args.no_theta_sweep)
    print(f"\nBenchmark finished: {summary['timed_runs']} timed runs, {summary['failures']} failures")
    for method, alpha in summary["mean_alpha"].items():
        print(f"  {method:<28} mean alpha {alpha:.3f}")
    return EXIT_OK


def main(argv=None):
    """Entry point; returns the process exit code"""
    logging.basicConfig(level=getattr(logging, LOGGING_CONFIG["level"]),
                        format=LOGGING_CONFIG["format"])
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        if not getattr(args, "handler", None):
            raise UsageError("choose a command: embed or benchmark")
        return args.handler(args)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, DatasetParseError) as e:
        logger.error(f"Input error: {e}")
        return EXIT_USAGE
    except OptimizationError as e:
        logger.error(f"Optimization failed: {e} {e.diagnostics}")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
