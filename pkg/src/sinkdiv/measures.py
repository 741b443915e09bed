"""Discrete probability measures on a bounding box.

Provides the measure/box containers, validation, the Kullback-Leibler
divergence and total-variation norm on shared supports, product measures,
grid sampling of densities, and the plain-text measure file format.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NegativeWeightError,
    PointOutsideBoxError,
    SupportMismatchError,
    WeightSumDeviationError,
    ZeroMassError,
)

# Weight sums must match 1 to this absolute tolerance after construction.
WEIGHT_SUM_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DimensionMismatchError(
            f"points must be a (n, d) array, got shape {pts.shape}"
        )
    return pts


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned compact box [lower_1, upper_1] x ... x [lower_d, upper_d]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatchError(
                f"box corners must be vectors of equal length, got {lo.shape} and {hi.shape}"
            )
        if not np.all(lo < hi):
            raise ValueError("box requires lower < upper componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, points) -> bool:
        pts = _as_points(points)
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"points have dimension {pts.shape[1]}, box has dimension {self.dim}"
            )
        return bool(np.all(pts >= self.lower) and np.all(pts <= self.upper))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points uniformly from the box."""
        u = rng.random((n, self.dim))
        return self.lower + u * (self.upper - self.lower)

    def grid(self, n_per_axis: int) -> np.ndarray:
        """Regular grid with n_per_axis nodes per axis, endpoints included.

        Rows are ordered row-major (first axis outermost).
        """
        axes = [np.linspace(self.lower[k], self.upper[k], n_per_axis) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud sum_i w_i * delta(x_i) in R^d.

    The raw constructor stores points and weights as given; use
    :meth:`normalized` to renormalize the weights exactly once. Arrays are
    frozen after construction and safe to share across threads.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise DimensionMismatchError(
                f"weights shape {w.shape} does not match {pts.shape[0]} points"
            )
        pts = np.ascontiguousarray(pts)
        w = np.ascontiguousarray(w)
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, points, weights=None) -> "DiscreteMeasure":
        """Construct a probability measure, dividing the weights by their sum once."""
        pts = _as_points(points)
        if weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(weights, dtype=float)
            if np.any(w < 0):
                raise NegativeWeightError(f"min weight {w.min()} < 0")
            total = float(np.sum(w))
            if total <= 0:
                raise ZeroMassError("weights sum to zero")
            w = w / total
        return cls(pts, w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def dirac(point) -> DiscreteMeasure:
    """Unit mass at a single point."""
    pts = _as_points(point if hasattr(point, "__len__") else [point])
    if pts.shape[0] != 1:
        pts = pts.reshape(1, -1)
    return DiscreteMeasure(pts, np.array([1.0]))


def uniform(points) -> DiscreteMeasure:
    """Equal-weight measure on the given points."""
    return DiscreteMeasure.normalized(points)


def validate(m: DiscreteMeasure, box: BoundingBox) -> DiscreteMeasure:
    """Check all measure invariants against a box; return the measure unchanged.

    Raises NegativeWeightError, WeightSumDeviationError, PointOutsideBoxError
    or DimensionMismatchError on the first violated invariant.
    """
    if m.dim != box.dim:
        raise DimensionMismatchError(
            f"measure dimension {m.dim} != box dimension {box.dim}"
        )
    if np.any(m.weights < 0):
        raise NegativeWeightError(f"min weight {m.weights.min()} < 0")
    total = _sequential_sum(m.weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise WeightSumDeviationError(f"weights sum to {total!r}, deviation > {WEIGHT_SUM_TOL}")
    if not (np.all(m.points >= box.lower) and np.all(m.points <= box.upper)):
        raise PointOutsideBoxError("some support point lies outside the box")
    return m


def _sequential_sum(values) -> float:
    # Left-to-right accumulation in stored order; keeps reported sums
    # bitwise reproducible regardless of the BLAS in use.
    total = 0.0
    for v in values:
        total += float(v)
    return total


def _require_shared_support(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.points.shape != nu.points.shape or not np.array_equal(mu.points, nu.points):
        raise SupportMismatchError("measures must share the same support point list")


def kl_divergence(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """KL(mu, nu) = sum_j mu_j log(mu_j / nu_j) on a shared support.

    Uses the convention 0 log 0 = 0 and returns +inf when some nu_j = 0 < mu_j.
    """
    _require_shared_support(mu, nu)
    total = 0.0
    for p, q in zip(mu.weights, nu.weights):
        if p == 0.0:
            continue
        if q == 0.0:
            return math.inf
        total += p * math.log(p / q)
    return total


def tv_norm(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Total variation norm ||mu - nu||_M = sum_j |mu_j - nu_j| on a shared support."""
    _require_shared_support(mu, nu)
    total = 0.0
    for p, q in zip(mu.weights, nu.weights):
        total += abs(p - q)
    return total


def product_measure(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    """Product measure mu (x) nu on R^{2d}, atoms (x_i, y_j) in row-major order."""
    if mu.dim != nu.dim:
        raise DimensionMismatchError(f"dimensions differ: {mu.dim} vs {nu.dim}")
    n, m = len(mu), len(nu)
    left = np.repeat(mu.points, m, axis=0)
    right = np.tile(nu.points, (n, 1))
    pts = np.concatenate([left, right], axis=1)
    w = np.outer(mu.weights, nu.weights).ravel()
    return DiscreteMeasure.normalized(pts, w)


def sample_grid_density(f, box: BoundingBox, n_per_axis: int) -> DiscreteMeasure:
    """Atomic approximation of a density: atoms on a regular grid, weights prop. to f.

    f is evaluated pointwise at each grid node and must be non-negative there.
    """
    nodes = box.grid(n_per_axis)
    values = np.array([float(f(x)) for x in nodes])
    if np.any(values < 0):
        raise NegativeWeightError("density evaluated to a negative value on the grid")
    if not np.any(values > 0):
        raise ZeroMassError("density vanishes on the whole grid")
    return DiscreteMeasure.normalized(nodes, values)


# ---------------------------------------------------------------------------
# Measure file format: one atom per line, "weight,x1,...,xd"; '#' comments.
# ---------------------------------------------------------------------------

def _format_float(x: float) -> str:
    return f"{x:.17g}"


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read the raw (values, points) columns of a measure-format file."""
    values = []
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            values.append(float(parts[0]))
            rows.append([float(p) for p in parts[1:]])
    if not rows:
        raise ZeroMassError(f"no atoms found in {path}")
    return np.array(values), np.array(rows)


def load_measure(path) -> DiscreteMeasure:
    """Read a measure file; weights are renormalized on load."""
    w, pts = load_table(path)
    if np.any(w < 0):
        raise NegativeWeightError(f"negative weight in {path}")
    return DiscreteMeasure.normalized(pts, w)


def save_measure(path, m: DiscreteMeasure, header: str | None = None):
    save_potential(path, m.points, m.weights, header=header)


def save_potential(path, points: np.ndarray, values: np.ndarray, header: str | None = None):
    """Write a value column plus coordinates in the measure file format."""
    pts = _as_points(points)
    lines = []
    if header:
        for h in header.splitlines():
            lines.append(f"# {h}")
    for v, row in zip(values, pts):
        cols = [_format_float(float(v))] + [_format_float(float(c)) for c in row]
        lines.append(",".join(cols))
    text = "\n".join(lines) + "\n"
    from .fileio import atomic_write_text

    atomic_write_text(path, text)
