"""
Embedding Model - Core data structures for hyperbolic t-SNE
Shared by the affinity, optimizer, metrics and CLI layers
"""

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.sparse import csr_matrix

from src.config import OPTIMIZER_CONFIG, QUADTREE_CONFIG


class HyperbolicDomainError(ValueError):
    """A point lies on or outside the unit disk where an interior point is required"""


class DatasetParseError(ValueError):
    """Malformed dataset file"""


class OptimizationError(RuntimeError):
    """Non-finite gradient during optimization"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SplitRule(Enum):
    """Radial splitting rule of the polar quadtree"""
    EQUAL_LENGTH = "equal-length"
    EQUAL_AREA = "equal-area"

    @property
    def code(self) -> int:
        # integer tag understood by the compiled tree builder
        return 0 if self is SplitRule.EQUAL_LENGTH else 1

    @classmethod
    def parse(cls, value) -> "SplitRule":
        if isinstance(value, SplitRule):
            return value
        return cls(str(value).lower().replace("_", "-"))


class Phase(Enum):
    """Optimization phase"""
    EXAGGERATION = "exaggeration"
    MAIN = "main"


class StopReason(Enum):
    """Why a run ended"""
    BOUNDARY = "boundary"
    MAX_ITERS = "max_iters"
    ERROR = "error"


@dataclass
class DataMatrix:
    """Dense input matrix, one row per data point"""
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    rank_deficient: bool = False

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"DataMatrix needs a 2-D array, got shape {self.values.shape}")
        if self.values.shape[0] < 2:
            raise ValueError("DataMatrix needs at least two rows")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("DataMatrix contains NaN or Inf entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.values.shape[0]:
                raise ValueError("Label count does not match row count")

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    def subset(self, indices: np.ndarray) -> "DataMatrix":
        labels = None if self.labels is None else self.labels[indices]
        return DataMatrix(self.values[indices], labels)

    def __repr__(self):
        tag = ", labelled" if self.labels is not None else ""
        return f"DataMatrix({self.n_points}x{self.n_dims}{tag})"


@dataclass
class NeighborLists:
    """k nearest neighbors per point, self excluded, ordered by (distance, index)"""
    indices: np.ndarray        # (n, k) int64
    sq_distances: np.ndarray   # (n, k) float64

    @property
    def k(self) -> int:
        return self.indices.shape[1]


@dataclass
class BandwidthCalibration:
    """Result of the per-point perplexity search"""
    sigmas: np.ndarray
    conditional: np.ndarray     # (n, k) rows of p_{j|i}, each summing to 1
    perplexities: np.ndarray    # achieved 2^H per point
    unconverged: np.ndarray     # indices whose search hit the step limit

    @property
    def converged(self) -> bool:
        return self.unconverged.size == 0


@dataclass
class SparseAffinities:
    """Symmetric, globally normalized high-dimensional probabilities P"""
    matrix: csr_matrix
    perplexity: float = float("nan")
    n_neighbors: int = 0

    def __post_init__(self):
        self.matrix = csr_matrix(self.matrix, dtype=np.float64)
        self.matrix.sort_indices()

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def total(self) -> float:
        return float(self.matrix.sum())

    def kernel_arrays(self):
        """CSR arrays in the dtypes the compiled kernels expect"""
        m = self.matrix
        return (m.indptr.astype(np.int64), m.indices.astype(np.int64),
                m.data.astype(np.float64))

    def __repr__(self):
        return f"SparseAffinities(n={self.n}, nnz={self.nnz}, perplexity={self.perplexity})"


@dataclass
class OptimizerConfig:
    """Hyper-parameters of one embedding run"""
    perplexity: float = OPTIMIZER_CONFIG["perplexity"]
    theta: float = OPTIMIZER_CONFIG["theta"]
    exaggeration_factor: float = OPTIMIZER_CONFIG["exaggeration_factor"]
    exaggeration_iters: int = OPTIMIZER_CONFIG["exaggeration_iters"]
    max_iters: int = OPTIMIZER_CONFIG["max_iters"]
    momentum_early: float = OPTIMIZER_CONFIG["momentum_early"]
    momentum_late: float = OPTIMIZER_CONFIG["momentum_late"]
    learning_rate: Optional[float] = None  # None -> n / 12000
    stop_boundary_eps: float = OPTIMIZER_CONFIG["stop_boundary_eps"]
    projection_eps: float = OPTIMIZER_CONFIG["projection_eps"]
    split_rule: SplitRule = SplitRule(QUADTREE_CONFIG["split_rule"])
    exact_mode: bool = False
    seed: int = 0
    use_gains: bool = True
    min_gain: float = OPTIMIZER_CONFIG["min_gain"]
    max_depth: int = QUADTREE_CONFIG["max_depth"]
    sample_costs: bool = False
    sample_gradient_errors: bool = False
    log_every: int = OPTIMIZER_CONFIG["log_every"]

    def __post_init__(self):
        self.split_rule = SplitRule.parse(self.split_rule)

    def validate(self):
        """Raise ValueError on inconsistent settings"""
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.exaggeration_factor < 1:
            raise ValueError("exaggeration_factor must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.perplexity <= 0:
            raise ValueError("perplexity must be > 0")
        if self.exaggeration_iters < 0 or self.max_iters < 0:
            raise ValueError("iteration counts must be >= 0")
        if not (0 <= self.momentum_early < 1 and 0 <= self.momentum_late < 1):
            raise ValueError("momentum must lie in [0, 1)")
        if self.stop_boundary_eps <= 0 or self.projection_eps <= 0:
            raise ValueError("boundary tolerances must be > 0")

    def resolved_learning_rate(self, n_points: int) -> float:
        if self.learning_rate is not None:
            return float(self.learning_rate)
        return n_points / OPTIMIZER_CONFIG["learning_rate_divisor"]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["split_rule"] = self.split_rule.value
        return data


@dataclass
class OptimizerState:
    """Iterate of the Riemannian gradient descent"""
    embedding: np.ndarray      # (n, 2) Poincare coordinates
    velocity: np.ndarray       # (n, 2) tangent-plane momentum buffer
    gains: np.ndarray          # (n, 2) per-coordinate gains
    iteration: int = 0
    phase: Phase = Phase.EXAGGERATION

    @property
    def n_points(self) -> int:
        return self.embedding.shape[0]

    def max_norm(self) -> float:
        return float(np.sqrt(np.max(np.einsum("ij,ij->i", self.embedding, self.embedding))))

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.embedding.copy(), self.velocity.copy(),
                              self.gains.copy(), self.iteration, self.phase)


@dataclass
class GradientField:
    """Per-point variation dC/dy_i, before the Riemannian 1/lambda scaling"""
    vectors: np.ndarray        # (n, 2)
    z: float = math.nan        # normalization sum Z used for the repulsive term

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.vectors))) and math.isfinite(self.z)

    def __array__(self, dtype=None, copy=None):
        return self.vectors if dtype is None else self.vectors.astype(dtype)


@dataclass
class TraversalStats:
    """Visit counts of the far-field traversals of one gradient evaluation"""
    visits: int = 0
    summary_visits: int = 0
    leaf_visits: int = 0
    n_queries: int = 0

    @property
    def visits_per_point(self) -> float:
        return self.visits / self.n_queries if self.n_queries else 0.0


@dataclass
class IterationRecord:
    """One optimizer iteration, as written to report.json"""
    iteration: int
    phase: Phase
    seconds: float
    max_norm: float
    cost: Optional[float] = None
    gradient_error: Optional[float] = None
    visits_per_point: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        row = {
            "iteration": self.iteration,
            "phase": self.phase.value,
            "seconds": self.seconds,
            "max_norm": self.max_norm,
        }
        for key in ("cost", "gradient_error", "visits_per_point"):
            value = getattr(self, key)
            if value is not None:
                row[key] = value
        return row


@dataclass
class RunReport:
    """Everything a run produced besides the embedding"""
    config: Dict[str, Any]
    iterations: List[IterationRecord] = field(default_factory=list)
    final_metrics: Dict[str, Any] = field(default_factory=dict)
    environment: Dict[str, Any] = field(default_factory=dict)
    stop_reason: StopReason = StopReason.MAX_ITERS
    timing: Dict[str, Any] = field(default_factory=dict)
    baseline: Optional[Dict[str, Any]] = None

    def iteration_seconds(self, phase: Optional[Phase] = None) -> np.ndarray:
        return np.array([r.seconds for r in self.iterations
                         if phase is None or r.phase is phase], dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "config": self.config,
            "iterations": [r.to_dict() for r in self.iterations],
            "final_metrics": self.final_metrics,
            "environment": self.environment,
            "stop_reason": self.stop_reason.value,
            "timing": self.timing,
        }
        if self.baseline is not None:
            data["baseline"] = self.baseline
        return data

    def __repr__(self):
        return (f"RunReport({len(self.iterations)} iterations, "
                f"stop={self.stop_reason.value})")


@dataclass
class PrecisionRecallCurve:
    """Neighborhood precision/recall for k = 1..k_max"""
    k_max: int
    precision: np.ndarray
    recall: np.ndarray

    def mean_precision(self) -> float:
        return float(np.mean(self.precision))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k_max": self.k_max,
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
        }


@dataclass
class ScalingEstimate:
    """Pairwise run-time growth exponents"""
    sizes: List[int]
    mean_iter_times: List[float]
    alphas: List[float]

    @property
    def mean_alpha(self) -> float:
        return float(np.mean(self.alphas)) if self.alphas else math.nan


@dataclass
class ExperimentPlan:
    """Benchmark sweep definition"""
    dataset_path: Optional[str] = None
    dataset_format: str = "csv"
    synthetic: str = "hierarchical"
    synthetic_n: int = 2000
    fractions: List[float] = field(default_factory=lambda: [0.1 * i for i in range(1, 11)])
    repeats: int = 5
    thetas: List[float] = field(default_factory=lambda: [0.1 * i for i in range(0, 11)])
    split_rules: List[SplitRule] = field(
        default_factory=lambda: [SplitRule.EQUAL_LENGTH, SplitRule.EQUAL_AREA])
    include_exact: bool = True
    error_study: bool = False
    exact_max_n: int = 20000
    seed_base: int = 0
    exaggeration_iters: int = OPTIMIZER_CONFIG["exaggeration_iters"]
    max_iters: int = OPTIMIZER_CONFIG["max_iters"]
    theta: float = OPTIMIZER_CONFIG["theta"]
    perplexity: float = OPTIMIZER_CONFIG["perplexity"]

    def __post_init__(self):
        self.split_rules = [SplitRule.parse(r) for r in self.split_rules]

    def validate(self):
        if not self.fractions or any(not (0 < f <= 1) for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if any(t < 0 for t in self.thetas):
            raise ValueError("thetas must be >= 0")
