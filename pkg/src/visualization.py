"""
Visualization Module
Deterministic SVG figures: embeddings in the Poincare disk (optionally with
the quadtree cells drawn over them), precision/recall curves and run-time
scaling plots.
"""

import io
import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import seaborn as sns  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from src.utils import write_atomic  # noqa: E402

logger = logging.getLogger(__name__)

VIEWPORT = 1.05
POINT_SIZE = 6.0
PALETTE = "tab10"
SVG_SETTINGS = {
    "svg.hashsalt": "hyperbolic-tsne",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def _save_svg(fig, path):
    buffer = io.BytesIO()
    with matplotlib.rc_context(SVG_SETTINGS):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return write_atomic(path, buffer.getvalue().decode("utf-8"))


def _label_colors(labels, n_points):
    if labels is None:
        return [sns.color_palette(PALETTE, 1)[0]] * n_points, []
    labels = np.asarray(labels)
    classes = list(dict.fromkeys(sorted(labels.tolist())))
    palette = sns.color_palette(PALETTE, 10)
    lookup = {c: palette[i % len(palette)] for i, c in enumerate(classes)}
    return [lookup[c] for c in labels.tolist()], [(c, lookup[c]) for c in classes]


def _cell_outline(min_r, max_r, min_phi, max_phi, samples=16):
    """Closed outline of a polar cell in Poincare coordinates"""
    inner = np.tanh(min_r / 2.0)
    outer = np.tanh(max_r / 2.0)
    phis = np.linspace(min_phi, max_phi, samples)
    outer_arc = np.stack([outer * np.cos(phis), outer * np.sin(phis)], axis=1)
    inner_arc = np.stack([inner * np.cos(phis[::-1]), inner * np.sin(phis[::-1])], axis=1)
    return np.vstack([outer_arc, inner_arc, outer_arc[:1]])


def tree_segments(tree):
    """Outlines of every nonempty leaf cell of a PolarQuadtree"""
    return [_cell_outline(tree.min_r[i], tree.max_r[i], tree.min_phi[i], tree.max_phi[i])
            for i in tree.leaves()]


def emit_svg(embedding, labels=None, path="output/embedding.svg", tree=None, title=None):
    """
    Render an embedding in the Poincare disk to SVG.

    The unit circle is outlined, points are fixed-size dots colored by label
    (cycling through a categorical palette) and the viewport is
    [-1.05, 1.05]^2. Identical input gives byte-identical files.

    Args:
        embedding (ndarray): (n, 2) Poincare coordinates
        labels (ndarray): Optional labels
        path (str): Output file
        tree (PolarQuadtree): Draw the leaf cells of this tree underneath
        title (str): Optional figure title

    Returns:
        str: Path written
    """
    Y = np.asarray(embedding, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.set_xlim(-VIEWPORT, VIEWPORT)
    ax.set_ylim(-VIEWPORT, VIEWPORT)
    ax.set_aspect("equal")
    ax.axis("off")
    fig.subplots_adjust(left=0, right=1, bottom=0, top=1)

    ax.add_patch(plt.Circle((0.0, 0.0), 1.0, fill=False, color="black", linewidth=0.8))
    if tree is not None:
        ax.add_collection(LineCollection(tree_segments(tree), colors="0.75", linewidths=0.3))

    colors, legend = _label_colors(labels, Y.shape[0])
    ax.scatter(Y[:, 0], Y[:, 1], s=POINT_SIZE, c=colors, linewidths=0)
    if 1 < len(legend) <= 20:
        for name, color in legend:
            ax.scatter([], [], s=20, color=color, label=str(name))
        ax.legend(loc="upper right", fontsize=7, frameon=False)
    if title:
        ax.set_title(title)

    written = _save_svg(fig, path)
    logger.info(f"Wrote {written}")
    return written


def plot_precision_recall(curves, path="output/precision_recall.svg"):
    """
    Precision against recall for several runs.

    Args:
        curves (dict): Legend label -> PrecisionRecallCurve
        path (str): Output file
    """
    sns.set_theme(style="whitegrid")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    palette = sns.color_palette("viridis", max(len(curves), 1))
    for color, (name, curve) in zip(palette, curves.items()):
        ax.plot(curve.recall, curve.precision, marker=".", color=color, label=str(name))
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7)
    fig.tight_layout()
    written = _save_svg(fig, path)
    sns.reset_defaults()
    return written


def plot_scaling(frame, path="output/scaling.svg"):
    """
    Mean iteration time against sample size on log-log axes.

    Args:
        frame (DataFrame): Columns size, method, mean_iter_seconds
        path (str): Output file
    """
    sns.set_theme(style="whitegrid")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    summary = frame.groupby(["method", "size"], as_index=False)["mean_iter_seconds"].mean()
    sns.lineplot(data=summary, x="size", y="mean_iter_seconds", hue="method", marker="o", ax=ax)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_ylabel("seconds per iteration")
    fig.tight_layout()
    written = _save_svg(fig, path)
    sns.reset_defaults()
    return written
