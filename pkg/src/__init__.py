"""
Hyperbolic t-SNE Source Package
"""

__version__ = "1.0.0"
__author__ = "Hyperbolic Embedding Team"

from .config import AFFINITY_CONFIG, OPTIMIZER_CONFIG, QUADTREE_CONFIG
from .embedding_model import (DataMatrix, OptimizerConfig, RunReport,
                              SplitRule)
from .load_data import load_dataset, save_dataset
from .affinity import build_affinities
from .quadtree import PolarQuadtree, build
from .objective import gradient_accelerated, gradient_exact, kl_cost
from .optimizer import run
from .metrics import one_nn_error, precision_recall

__all__ = [
    'DataMatrix',
    'OptimizerConfig',
    'RunReport',
    'SplitRule',
    'load_dataset',
    'save_dataset',
    'build_affinities',
    'PolarQuadtree',
    'build',
    'gradient_exact',
    'gradient_accelerated',
    'kl_cost',
    'run',
    'one_nn_error',
    'precision_recall',
    'AFFINITY_CONFIG',
    'OPTIMIZER_CONFIG',
    'QUADTREE_CONFIG',
]
