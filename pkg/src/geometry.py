"""
Geometry Module
Poincare-disk and Klein-model primitives: distances, metric factor, distance
derivative, exponential map, Mobius addition, Einstein midpoint, projection.

All public functions accept a single point of shape (2,) or a batch of shape
(..., 2) and broadcast like numpy.
"""

import math

import numba
import numpy as np

from src.config import OPTIMIZER_CONFIG
from src.embedding_model import HyperbolicDomainError

PROJECTION_EPS = OPTIMIZER_CONFIG["projection_eps"]

# sqrt(gamma^2 - 1) floor for direct calls of distance_gradient
SINGULARITY_FLOOR = 1e-15


def _as_points(p):
    return np.asarray(p, dtype=np.float64)


def _col(x):
    return np.asarray(x, dtype=np.float64)[..., None]


def norm_sq(p):
    """Squared Euclidean norm along the last axis"""
    p = _as_points(p)
    return np.einsum("...i,...i->...", p, p)


def check_interior(p, name="point"):
    """Raise HyperbolicDomainError unless every point lies strictly inside the disk"""
    sq = norm_sq(p)
    if not np.all(np.isfinite(sq)) or np.any(sq >= 1.0):
        worst = float(np.sqrt(np.max(sq))) if np.size(sq) else float("nan")
        raise HyperbolicDomainError(f"{name} must lie strictly inside the unit disk (norm {worst})")
    return sq


def hyperbolic_distance(a, b):
    """
    Geodesic distance in the Poincare disk.

    Args:
        a, b: Points (..., 2), strictly inside the disk

    Returns:
        ndarray or float: arcosh(1 + 2|a-b|^2 / ((1-|a|^2)(1-|b|^2)))
    """
    a = _as_points(a)
    b = _as_points(b)
    alpha = 1.0 - check_interior(a, "a")
    beta = 1.0 - check_interior(b, "b")
    t = 2.0 * norm_sq(a - b) / (alpha * beta)
    # arcosh(1 + t) written without the cancellation near t = 0
    d = np.log1p(t + np.sqrt(t * (t + 2.0)))
    return float(d) if np.ndim(d) == 0 else d


def metric_factor(p):
    """Conformal factor lambda_p = 2 / (1 - |p|^2)"""
    value = 2.0 / (1.0 - check_interior(p))
    return float(value) if np.ndim(value) == 0 else value


def distance_gradient(yi, yj):
    """
    Euclidean partial derivative of d^H(yi, yj) with respect to yi.

    The pair yi == yj is singular; callers summing over pairs skip it. A direct
    call clamps sqrt(gamma^2 - 1) at SINGULARITY_FLOOR and returns a finite vector.
    """
    yi = _as_points(yi)
    yj = _as_points(yj)
    alpha = 1.0 - check_interior(yi, "yi")
    beta = 1.0 - check_interior(yj, "yj")
    t = 2.0 * norm_sq(yi - yj) / (alpha * beta)
    root = np.maximum(np.sqrt(t * (t + 2.0)), SINGULARITY_FLOOR)
    inner = np.einsum("...i,...i->...", yi, yj)
    coef = (norm_sq(yj) - 2.0 * inner + 1.0) / alpha
    direction = _col(coef) * yi - yj
    return 4.0 * direction / _col(alpha * beta * root)


def squared_distance_gradient(yi, yj):
    """
    Derivative of d^H(yi, yj)^2 / 2 with respect to yi, i.e. d * dd/dyi.

    This is the pair vector of the t-SNE gradient; it vanishes smoothly at yi == yj.
    """
    yi = _as_points(yi)
    yj = _as_points(yj)
    alpha = 1.0 - check_interior(yi, "yi")
    beta = 1.0 - check_interior(yj, "yj")
    t = 2.0 * norm_sq(yi - yj) / (alpha * beta)
    root = np.sqrt(t * (t + 2.0))
    d = np.log1p(t + root)
    ratio = np.where(root > 0.0, d / np.where(root > 0.0, root, 1.0), 1.0)
    inner = np.einsum("...i,...i->...", yi, yj)
    coef = (norm_sq(yj) - 2.0 * inner + 1.0) / alpha
    direction = _col(coef) * yi - yj
    return 4.0 * direction * _col(ratio / (alpha * beta))


def mobius_add(a, b):
    """Mobius addition a (+) b in the unit Poincare disk"""
    a = _as_points(a)
    b = _as_points(b)
    ab = np.einsum("...i,...i->...", a, b)
    a2 = norm_sq(a)
    b2 = norm_sq(b)
    numerator = _col(1.0 + 2.0 * ab + b2) * a + _col(1.0 - a2) * b
    denominator = 1.0 + 2.0 * ab + a2 * b2
    return numerator / _col(denominator)


def exp_map(base, v):
    """
    Exponential map at base applied to the tangent vector v.

    exp_base(v) = base (+) tanh(lambda_base |v| / 2) v / |v|; a zero vector maps to base.
    """
    base = _as_points(base)
    v = _as_points(v)
    lam = 2.0 / (1.0 - check_interior(base, "base"))
    v_norm = np.sqrt(norm_sq(v))
    safe = np.where(v_norm > 0.0, v_norm, 1.0)
    scale = np.where(v_norm > 0.0, np.tanh(lam * v_norm / 2.0) / safe, 0.0)
    return mobius_add(base, _col(scale) * v)


def project_to_disk(p, eps=PROJECTION_EPS):
    """Radially rescale points with norm >= 1 to norm 1 - eps; others pass unchanged"""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    p = _as_points(p)
    norms = np.sqrt(norm_sq(p))
    outside = norms >= 1.0
    if not np.any(outside):
        return p.copy()
    scale = np.where(outside, (1.0 - eps) / np.where(outside, norms, 1.0), 1.0)
    return p * _col(scale)


def poincare_to_klein(p):
    """k = 2p / (1 + |p|^2)"""
    p = _as_points(p)
    sq = check_interior(p)
    return 2.0 * p / _col(1.0 + sq)


def klein_to_poincare(k):
    """p = k / (1 + sqrt(1 - |k|^2))"""
    k = _as_points(k)
    sq = check_interior(k, "Klein point")
    return k / _col(1.0 + np.sqrt(1.0 - sq))


def lorentz_factor(k):
    """gamma(k) = 1 / sqrt(1 - |k|^2) for Klein points"""
    return 1.0 / np.sqrt(1.0 - check_interior(k, "Klein point"))


def einstein_midpoint(points, weights=None):
    """
    Weighted Einstein midpoint, computed in Klein coordinates.

    Args:
        points: (m, 2) Poincare points, m >= 1
        weights: (m,) nonnegative weights, not all zero (default: ones)

    Returns:
        ndarray: (2,) Poincare midpoint
    """
    points = np.atleast_2d(_as_points(points))
    if points.shape[0] == 0:
        raise ValueError("einstein_midpoint needs at least one point")
    weights = np.ones(points.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    klein = poincare_to_klein(points)
    wg = weights * lorentz_factor(klein)
    centre = (wg[:, None] * klein).sum(axis=0) / wg.sum()
    return klein_to_poincare(centre)


class MidpointAccumulator:
    """Rolling Einstein midpoint: folds one point in with O(1) work"""

    def __init__(self):
        self.weight_gamma = 0.0
        self.weighted_klein = np.zeros(2)
        self.count = 0

    def add(self, point, weight=1.0):
        klein = poincare_to_klein(point)
        wg = weight * float(lorentz_factor(klein))
        self.weight_gamma += wg
        self.weighted_klein += wg * klein
        self.count += 1

    def midpoint(self):
        if self.count == 0 or self.weight_gamma <= 0:
            raise ValueError("midpoint of an empty accumulator")
        return klein_to_poincare(self.weighted_klein / self.weight_gamma)


def to_polar(p):
    """Poincare points -> (hyperbolic radius, angle in [0, 2pi))"""
    p = _as_points(p)
    rho = np.sqrt(check_interior(p))
    r = 2.0 * np.arctanh(rho)
    phi = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2.0 * np.pi)
    # mod can round 2pi - tiny up to exactly 2pi
    phi = np.where(phi >= 2.0 * np.pi, 0.0, phi)
    return r, phi


def from_polar(r, phi):
    """(hyperbolic radius, angle) -> Poincare points"""
    rho = np.tanh(np.asarray(r, dtype=np.float64) / 2.0)
    phi = np.asarray(phi, dtype=np.float64)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)


@numba.njit(cache=True)
def pair_terms(ax, ay, bx, by):
    """
    Scalar kernel: (d^H(a, b), d * dd/da) for interior a, b.

    Returns (0, 0, 0) for coincident points.
    """
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    dx = ax - bx
    dy = ay - by
    diff2 = dx * dx + dy * dy
    if diff2 == 0.0:
        return 0.0, 0.0, 0.0
    alpha = 1.0 - a2
    beta = 1.0 - b2
    t = 2.0 * diff2 / (alpha * beta)
    root = math.sqrt(t * (t + 2.0))
    d = math.log1p(t + root)
    coef = (b2 - 2.0 * (ax * bx + ay * by) + 1.0) / alpha
    scale = 4.0 * (d / root) / (alpha * beta)
    return d, scale * (coef * ax - bx), scale * (coef * ay - by)


@numba.njit(cache=True)
def pair_distance(ax, ay, bx, by):
    """Scalar kernel: d^H(a, b) for interior a, b"""
    dx = ax - bx
    dy = ay - by
    t = 2.0 * (dx * dx + dy * dy) / ((1.0 - ax * ax - ay * ay) * (1.0 - bx * bx - by * by))
    return math.log1p(t + math.sqrt(t * (t + 2.0)))
