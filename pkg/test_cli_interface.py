#!/usr/bin/env python3
"""Tests for the artifact writers, SVG output, benchmark bookkeeping and the CLI"""

import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose

sys.path.insert(0, str(Path(__file__).parent))

from src.benchmark import alpha_table, cmd_benchmark, method_name  # noqa: E402
from src.cli_interface import EXIT_OK, EXIT_USAGE, main  # noqa: E402
from src.config import DEMO_DATASET, REPORT_SCHEMA  # noqa: E402
from src.embedding_model import ExperimentPlan, SplitRule  # noqa: E402
from src.quadtree import build  # noqa: E402
from src.utils import (export_embedding_csv, json_safe,  # noqa: E402
                       write_json)
from src.visualization import emit_svg, tree_segments  # noqa: E402

FAST = ["--ex-iters", "5", "--max-iters", "5", "--perplexity", "10"]


def ring(n=40, seed=0):
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0, 2 * np.pi, n)
    radii = rng.uniform(0.1, 0.9, n)
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


JSON_TYPES = {"object": dict, "array": list, "string": str, "boolean": bool,
              "integer": int, "number": (int, float), "null": type(None)}


def matches_type(value, name):
    if name in ("integer", "number") and isinstance(value, bool):
        return False
    return isinstance(value, JSON_TYPES[name])


def check_schema(value, schema, root, path="report"):
    """Assert value satisfies the subset of JSON Schema used by run_report.schema.json"""
    if "$ref" in schema:
        schema = root["$defs"][schema["$ref"].rsplit("/", 1)[-1]]
    if "enum" in schema:
        assert value in schema["enum"], f"{path}: {value!r} not in {schema['enum']}"
    if "type" in schema:
        types = schema["type"] if isinstance(schema["type"], list) else [schema["type"]]
        assert any(matches_type(value, t) for t in types), f"{path}: {value!r} is not {types}"
    if matches_type(value, "number"):
        assert value >= schema.get("minimum", -math.inf), path
        assert value <= schema.get("maximum", math.inf), path
        assert value > schema.get("exclusiveMinimum", -math.inf), path
        assert value < schema.get("exclusiveMaximum", math.inf), path
    if isinstance(value, dict):
        for key in schema.get("required", []):
            assert key in value, f"{path}: missing {key}"
        for key, sub in schema.get("properties", {}).items():
            if key in value:
                check_schema(value[key], sub, root, f"{path}.{key}")
    if isinstance(value, list) and "items" in schema:
        for k, item in enumerate(value):
            check_schema(item, schema["items"], root, f"{path}[{k}]")


def test_json_safe():
    value = json_safe({"a": np.float64(1.5), "b": np.int64(3), "c": np.array([1.0, np.nan]),
                       "d": SplitRule.EQUAL_AREA, "e": (math.inf, None)})
    assert value == {"a": 1.5, "b": 3, "c": [1.0, None], "d": "equal-area", "e": [None, None]}
    json.dumps(value)


def test_writers_are_atomic_and_complete():
    with tempfile.TemporaryDirectory() as tmp:
        target = Path(tmp) / "nested" / "out.json"
        write_json({"x": 1}, target)
        assert json.loads(target.read_text()) == {"x": 1}
        assert [p.name for p in target.parent.iterdir()] == ["out.json"]

        Y = ring(5)
        path = export_embedding_csv(Y, np.arange(5), Path(tmp) / "embedding.csv")
        frame = pd.read_csv(path, float_precision="round_trip")
    assert list(frame.columns) == ["index", "x", "y", "label"]
    assert np.array_equal(frame[["x", "y"]].to_numpy(), Y)


def test_svg_is_byte_identical():
    Y = ring(50, 1)
    labels = np.arange(50) % 12
    with tempfile.TemporaryDirectory() as tmp:
        first = Path(emit_svg(Y, labels, Path(tmp) / "a.svg")).read_bytes()
        second = Path(emit_svg(Y, labels, Path(tmp) / "b.svg")).read_bytes()
        with_tree = Path(emit_svg(Y, labels, Path(tmp) / "c.svg", tree=build(Y))).read_bytes()
        plain = Path(emit_svg(Y, None, Path(tmp) / "d.svg")).read_bytes()
    assert first == second
    assert first.startswith(b"<?xml")
    assert len(with_tree) > len(first)
    assert plain != first


def test_tree_segments_cover_leaves():
    tree = build(ring(30, 2))
    segments = tree_segments(tree)
    assert len(segments) == tree.leaves().size
    for outline in segments:
        assert np.all(np.linalg.norm(outline, axis=1) < 1.0)
        assert np.array_equal(outline[0], outline[-1])


def test_cli_embed_smoke():
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["embed", "--output-dir", tmp, "--svg", *FAST])
        assert code == EXIT_OK
        written = sorted(p.name for p in Path(tmp).iterdir())
        assert written == ["embedding.csv", "embedding.svg", "report.json", "report.txt"]

        frame = pd.read_csv(Path(tmp) / "embedding.csv")
        assert len(frame) == 60
        assert np.all(np.hypot(frame["x"], frame["y"]) < 1.0)

        text = (Path(tmp) / "report.txt").read_text()
        assert "RUN REPORT" in text and "Stop reason:" in text

        report = json.loads((Path(tmp) / "report.json").read_text())
        schema = json.loads(REPORT_SCHEMA.read_text())
        check_schema(report, schema, schema)
        assert report["stop_reason"] in ("boundary", "max_iters")
        assert report["timing"]["pooled"]["count"] == len(report["iterations"])
        assert report["environment"]["threads"] >= 1


def test_cli_embed_with_exact_baseline():
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["embed", "--output-dir", tmp, "--with-exact-baseline", "--split", "equal-area", *FAST])
        assert code == EXIT_OK
        report = json.loads((Path(tmp) / "report.json").read_text())
    schema = json.loads(REPORT_SCHEMA.read_text())
    check_schema(report, schema, schema)
    assert report["config"]["split_rule"] == "equal-area"
    assert report["baseline"]["relative_cost_error"] is None or report["baseline"]["relative_cost_error"] >= 0
    assert "mean_gradient_error" in report["final_metrics"]


def test_cli_usage_errors():
    with tempfile.TemporaryDirectory() as tmp:
        for argv in (["embed", "--bogus"],
                     ["embed", "--split", "diagonal"],
                     ["embed", "--theta", "-1", "--output-dir", tmp],
                     ["embed", "--exact", "--exact-max-n", "10", "--output-dir", tmp],
                     ["embed", "--input", str(Path(tmp) / "missing.csv"), "--output-dir", tmp],
                     ["benchmark", "--fractions", "0,1"],
                     []):
            assert main(argv) == EXIT_USAGE, argv
        assert not (Path(tmp) / "embedding.csv").exists()


def test_benchmark_bookkeeping():
    plan = ExperimentPlan(synthetic="gaussian", synthetic_n=2000, fractions=[0.5, 1.0], repeats=2,
                          thetas=[], split_rules=[SplitRule.EQUAL_LENGTH], include_exact=True,
                          exaggeration_iters=2, max_iters=3, perplexity=10.0)
    with tempfile.TemporaryDirectory() as tmp:
        summary = cmd_benchmark(plan, tmp)
        scaling = pd.read_csv(Path(tmp) / "scaling.csv")
        assert (Path(tmp) / "summary.json").exists()
        assert (Path(tmp) / "scaling.svg").exists()
    assert len(scaling) == 8
    assert summary["timed_runs"] == 8
    assert summary["failures"] == 0
    assert sorted(scaling["size"].unique()) == [1000, 2000]
    assert set(scaling["method"]) == {"exact", method_name(SplitRule.EQUAL_LENGTH)}
    assert set(summary["speedups"][method_name(SplitRule.EQUAL_LENGTH)]) == {1000, 2000}
    alphas = alpha_table(scaling)
    assert len(alphas) == 2


def test_benchmark_error_study():
    plan = ExperimentPlan(synthetic="gaussian", synthetic_n=200, fractions=[0.5, 1.0], repeats=1,
                          thetas=[], split_rules=[SplitRule.EQUAL_LENGTH], include_exact=False,
                          error_study=True, exact_max_n=150,
                          exaggeration_iters=2, max_iters=3, perplexity=10.0)
    with tempfile.TemporaryDirectory() as tmp:
        summary = cmd_benchmark(plan, tmp)
        errors = pd.read_csv(Path(tmp) / "errors.csv")
    assert len(errors) == 2
    done = errors[errors["status"] == "ok"]
    assert list(done["size"]) == [100]
    assert list(errors[errors["status"] == "skipped"]["size"]) == [200]
    # iteration 0 of each phase is on the sampling schedule
    assert done["n_samples"].iloc[0] == 2
    assert 0.0 <= done["mean_gradient_error"].iloc[0] < 0.1
    assert done["relative_cost_error"].iloc[0] >= 0.0
    method = method_name(SplitRule.EQUAL_LENGTH)
    assert summary["errors"][method]["runs"] == 1
    assert_allclose(summary["errors"][method]["mean_gradient_error"], done["mean_gradient_error"].iloc[0])
    assert summary["plan"]["error_study"] is True


def test_cli_embed_synthetic():
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["embed", "--synthetic", "gaussian", "--synthetic-n", "120",
                     "--output-dir", tmp, *FAST])
        assert code == EXIT_OK
        frame = pd.read_csv(Path(tmp) / "embedding.csv")
        assert len(frame) == 120
        assert set(frame["label"]) == {0, 1, 2}

        both = ["embed", "--synthetic", "gaussian", "--input", str(DEMO_DATASET), "--output-dir", tmp]
        assert main(both) == EXIT_USAGE
        assert main(["embed", "--synthetic", "rings", "--output-dir", tmp]) == EXIT_USAGE


def test_benchmark_exact_cap_and_theta_sweep():
    argv = ["benchmark", "--synthetic", "gaussian", "--synthetic-n", "200",
            "--fractions", "0.5,1.0", "--repeats", "1", "--thetas", "0,0.5",
            "--splits", "equal-length,equal-area", "--exact-max-n", "150",
            "--ex-iters", "2", "--max-iters", "2", "--perplexity", "10", "--output-dir"]
    with tempfile.TemporaryDirectory() as tmp:
        assert main([*argv, tmp]) == EXIT_OK
        scaling = pd.read_csv(Path(tmp) / "scaling.csv")
        sweep = pd.read_csv(Path(tmp) / "theta_sweep.csv")
        summary = json.loads((Path(tmp) / "summary.json").read_text())
        assert (Path(tmp) / "precision_recall.svg").exists()
    skipped = scaling[scaling["status"] == "skipped"]
    assert list(skipped["size"]) == [200]
    assert list(skipped["method"]) == ["exact"]
    assert len(scaling) == 6
    assert list(sweep["status"]) == ["skipped", "ok"]
    assert "reduction_percent" in summary["split_rules"]


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"✅ {test.__name__}")
