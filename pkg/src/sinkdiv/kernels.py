"""Kernel and cost function zoo.

Radial kernels K(x, y) = h(||x - y||) with analytic gradients, a conservative
numerically-precomputed Lipschitz constant per instance, the order-1
conditionally-positive-definite anchor shift, and an empirical
positive-definiteness check. Costs mirror the same machinery; a kernel K can
be used as the cost c = -K.
"""
from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonDifferentiablePointError,
    NotNegatedKernelError,
)
from .measures import BoundingBox, _as_points

# Grid resolution and safety inflation for the numeric Lipschitz bound
# max |h'(r)| over r in [0, diam].
_LIPSCHITZ_GRID = 10_000
_LIPSCHITZ_INFLATION = 1.05


def pairwise_distances(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix, entry (i, j) = ||xs_i - ys_j||.

    Computed from coordinate differences so that D[i, j] and the transposed
    evaluation agree bitwise.
    """
    xs = _as_points(xs)
    ys = _as_points(ys)
    if xs.shape[1] != ys.shape[1]:
        raise DimensionMismatchError(
            f"point sets have dimensions {xs.shape[1]} and {ys.shape[1]}"
        )
    diff = xs[:, None, :] - ys[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


class _RadialFunction:
    """Shared evaluation machinery for functions of the distance ||x - y||."""

    #: True when the gradient of h(||x-y||) extends continuously to x = y.
    smooth_at_zero = True

    def __init__(self, box: BoundingBox):
        self.box = box
        self.lipschitz = self._lipschitz_bound()

    # profile h and its derivative h', vectorized over r >= 0
    def _profile(self, r):
        raise NotImplementedError

    def _profile_deriv(self, r):
        raise NotImplementedError

    def _lipschitz_bound(self) -> float:
        r = np.linspace(0.0, self.box.diameter, _LIPSCHITZ_GRID)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.abs(self._profile_deriv(r))
        return _LIPSCHITZ_INFLATION * float(np.max(d))

    def eval(self, x, y) -> float:
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        r = float(np.sqrt(np.sum((x - y) * (x - y))))
        return float(self._profile(r))

    def gram(self, xs, ys) -> np.ndarray:
        """Matrix of evaluations, row-major over xs (outer) and ys (inner)."""
        return self._profile(pairwise_distances(xs, ys))

    def grad_y(self, x, y) -> np.ndarray:
        """Gradient in the second argument at a single pair."""
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        d = y - x
        r = float(np.sqrt(np.sum(d * d)))
        if r == 0.0:
            if not self.smooth_at_zero:
                raise NonDifferentiablePointError(
                    f"{type(self).__name__} is not differentiable at coincident points"
                )
            return np.zeros_like(d)
        return float(self._profile_deriv(r)) / r * d

    def pairwise_grad_y(self, xs, ys) -> np.ndarray:
        """(n, m, d) array of gradients in the second argument for all pairs."""
        xs = _as_points(xs)
        ys = _as_points(ys)
        diff = ys[None, :, :] - xs[:, None, :]
        r = np.sqrt(np.sum(diff * diff, axis=2))
        zero = r == 0.0
        if np.any(zero) and not self.smooth_at_zero:
            raise NonDifferentiablePointError(
                f"{type(self).__name__} is not differentiable at coincident points"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(zero, 0.0, self._profile_deriv(r) / np.where(zero, 1.0, r))
        return scale[:, :, None] * diff


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

class Kernel(_RadialFunction):
    """Symmetric kernel with Lipschitz metadata.

    cpd_order is 0 for positive definite variants and 1 for kernels that are
    conditionally positive definite of order one (fixable by the anchor shift).
    """

    variant = "Kernel"
    cpd_order = 0

    def params(self) -> dict:
        return {}


class Gaussian(Kernel):
    """K(x, y) = exp(-||x-y||^2 / c^2), strictly positive definite."""

    variant = "Gaussian"

    def __init__(self, box: BoundingBox, c: float = 1.0):
        if c <= 0:
            raise ValueError("Gaussian requires c > 0")
        self.c = float(c)
        super().__init__(box)

    def _profile(self, r):
        return np.exp(-(r * r) / (self.c * self.c))

    def _profile_deriv(self, r):
        return -2.0 * r / (self.c * self.c) * np.exp(-(r * r) / (self.c * self.c))

    def params(self):
        return {"c": self.c}


class InverseMultiquadric(Kernel):
    """K(x, y) = (c^2 + ||x-y||^2)^(-p), strictly positive definite."""

    variant = "InverseMultiquadric"

    def __init__(self, box: BoundingBox, c: float = 1.0, p: float = 0.5):
        if c <= 0 or p <= 0:
            raise ValueError("InverseMultiquadric requires c > 0 and p > 0")
        self.c = float(c)
        self.p = float(p)
        super().__init__(box)

    def _profile(self, r):
        return (self.c * self.c + r * r) ** (-self.p)

    def _profile_deriv(self, r):
        return -2.0 * self.p * r * (self.c * self.c + r * r) ** (-self.p - 1.0)

    def params(self):
        return {"c": self.c, "p": self.p}


class WendlandPower(Kernel):
    """K(x, y) = (1 - ||x-y||)_+^p, positive definite for p >= floor(d/2) + 1."""

    variant = "WendlandPower"
    smooth_at_zero = False

    def __init__(self, box: BoundingBox, p: float):
        min_p = box.dim // 2 + 1
        if p < min_p:
            raise ValueError(f"WendlandPower in dimension {box.dim} requires p >= {min_p}")
        self.p = float(p)
        super().__init__(box)

    def _profile(self, r):
        return np.maximum(1.0 - r, 0.0) ** self.p

    def _profile_deriv(self, r):
        r = np.asarray(r, dtype=float)
        # the 0**0 = 1 convention would leak outside the support for p = 1
        return np.where(r < 1.0, -self.p * np.maximum(1.0 - r, 0.0) ** (self.p - 1.0), 0.0)

    def params(self):
        return {"p": self.p}


class NegativeDistance(Kernel):
    """K(x, y) = -||x-y||, conditionally positive definite of order 1."""

    variant = "NegativeDistance"
    cpd_order = 1
    smooth_at_zero = False

    def _profile(self, r):
        return -np.asarray(r, dtype=float)

    def _profile_deriv(self, r):
        return -np.ones_like(np.asarray(r, dtype=float))


class ShiftedNegativeDistance(Kernel):
    """K(x, y) = C - ||x-y||, positive definite on the box for large enough C.

    C defaults to twice the box diameter; for probability measures the shift
    cancels in discrepancies, so C only affects numerical conditioning.
    """

    variant = "ShiftedNegativeDistance"
    smooth_at_zero = False

    def __init__(self, box: BoundingBox, C: float | None = None):
        if C is None:
            C = 2.0 * box.diameter
        if C <= 0:
            raise ValueError("ShiftedNegativeDistance requires C > 0")
        self.C = float(C)
        super().__init__(box)

    def _profile(self, r):
        return self.C - np.asarray(r, dtype=float)

    def _profile_deriv(self, r):
        return -np.ones_like(np.asarray(r, dtype=float))

    def params(self):
        return {"C": self.C}


class SmoothedNegativeDistance(Kernel):
    """K(x, y) = -sqrt(c^2 + ||x-y||^2), a differentiable order-1 cpd distance kernel."""

    variant = "SmoothedNegativeDistance"
    cpd_order = 1

    def __init__(self, box: BoundingBox, c: float = 1e-2):
        if c <= 0:
            raise ValueError("SmoothedNegativeDistance requires c > 0")
        self.c = float(c)
        super().__init__(box)

    def _profile(self, r):
        return -np.sqrt(self.c * self.c + r * r)

    def _profile_deriv(self, r):
        return -r / np.sqrt(self.c * self.c + r * r)

    def params(self):
        return {"c": self.c}


class CpdShifted(Kernel):
    """Anchor shift K~(x, y) = K(x, y) - K(u, y) - K(x, u) + K(u, u).

    Turns an order-1 conditionally positive definite kernel into a positive
    definite one without changing discrepancies between probability measures.
    """

    variant = "CpdShifted"

    def __init__(self, base: Kernel, anchor):
        self.base = base
        u = np.asarray(anchor, dtype=float).ravel()
        if u.shape[0] != base.box.dim:
            raise DimensionMismatchError(
                f"anchor dimension {u.shape[0]} != box dimension {base.box.dim}"
            )
        u.flags.writeable = False
        self.anchor = u
        self._kuu = base.eval(u, u)
        self.smooth_at_zero = base.smooth_at_zero
        super().__init__(base.box)

    def _lipschitz_bound(self) -> float:
        # |K~(x,y) - K~(x',y)| <= |K(x,y)-K(x',y)| + |K(x,u)-K(x',u)|
        return 2.0 * self.base.lipschitz

    def eval(self, x, y) -> float:
        # grouped so the two anchor cross terms commute; evaluation is then
        # bitwise symmetric in (x, y)
        return (self.base.eval(x, y) + self._kuu) - (
            self.base.eval(self.anchor, y) + self.base.eval(x, self.anchor)
        )

    def gram(self, xs, ys) -> np.ndarray:
        u = self.anchor[None, :]
        return (self.base.gram(xs, ys) + self._kuu) - (
            self.base.gram(u, ys) + self.base.gram(xs, u)
        )

    def grad_y(self, x, y) -> np.ndarray:
        return self.base.grad_y(x, y) - self.base.grad_y(self.anchor, y)

    def pairwise_grad_y(self, xs, ys) -> np.ndarray:
        u = self.anchor[None, :]
        return self.base.pairwise_grad_y(xs, ys) - self.base.pairwise_grad_y(u, ys)

    def params(self):
        return {
            "base": {"variant": self.base.variant, "params": self.base.params()},
            "anchor": self.anchor.tolist(),
        }


def empirical_pd_check(kernel: Kernel, n: int, seed: int, box: BoundingBox | None = None) -> float:
    """Smallest eigenvalue of the Gram matrix on n seeded uniform points."""
    if n < 2:
        raise ValueError("empirical_pd_check requires n >= 2")
    box = box if box is not None else kernel.box
    rng = np.random.default_rng(seed)
    pts = box.sample(n, rng)
    gram = kernel.gram(pts, pts)
    return float(np.linalg.eigvalsh(gram)[0])


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

class Cost(_RadialFunction):
    """Symmetric transport cost with Lipschitz metadata."""

    variant = "Cost"

    def matrix(self, xs, ys) -> np.ndarray:
        return self.gram(xs, ys)

    def params(self) -> dict:
        return {}


class AbsDistance(Cost):
    """c(x, y) = ||x-y||."""

    variant = "AbsDistance"
    smooth_at_zero = False

    def _profile(self, r):
        return np.asarray(r, dtype=float)

    def _profile_deriv(self, r):
        return np.ones_like(np.asarray(r, dtype=float))


class PowerDistance(Cost):
    """c(x, y) = ||x-y||^p."""

    variant = "PowerDistance"

    def __init__(self, box: BoundingBox, p: float):
        if p <= 0:
            raise ValueError("PowerDistance requires p > 0")
        self.p = float(p)
        self.smooth_at_zero = p > 1
        super().__init__(box)

    def _profile(self, r):
        return np.asarray(r, dtype=float) ** self.p

    def _profile_deriv(self, r):
        # 0**0 = 1 gives the correct h'(0) = p for p = 1; p < 1 yields inf there
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.p * np.asarray(r, dtype=float) ** (self.p - 1.0)

    def params(self):
        return {"p": self.p}


class NegatedKernel(Cost):
    """Cost c(x, y) = -K(x, y); may take negative values."""

    variant = "NegatedKernel"

    def __init__(self, kernel: Kernel):
        self.kernel = kernel
        self.smooth_at_zero = kernel.smooth_at_zero
        super().__init__(kernel.box)

    def _lipschitz_bound(self) -> float:
        return self.kernel.lipschitz

    def eval(self, x, y) -> float:
        return -self.kernel.eval(x, y)

    def gram(self, xs, ys) -> np.ndarray:
        return -self.kernel.gram(xs, ys)

    def grad_y(self, x, y) -> np.ndarray:
        return -self.kernel.grad_y(x, y)

    def pairwise_grad_y(self, xs, ys) -> np.ndarray:
        return -self.kernel.pairwise_grad_y(xs, ys)

    def params(self):
        return {"kernel": {"variant": self.kernel.variant, "params": self.kernel.params()}}


def kernel_for_cost(cost: Cost) -> Kernel:
    """Kernel K with c = -K, when the cost is kernel-backed.

    AbsDistance maps to NegativeDistance; all other non-kernel costs raise.
    """
    if isinstance(cost, NegatedKernel):
        return cost.kernel
    if isinstance(cost, AbsDistance):
        return NegativeDistance(cost.box)
    raise NotNegatedKernelError(f"cost {cost.variant} is not of the form -K")


# ---------------------------------------------------------------------------
# JSON construction: {"variant": "...", "params": {...}}
# ---------------------------------------------------------------------------

_KERNEL_VARIANTS = {
    "Gaussian": Gaussian,
    "InverseMultiquadric": InverseMultiquadric,
    "WendlandPower": WendlandPower,
    "NegativeDistance": NegativeDistance,
    "ShiftedNegativeDistance": ShiftedNegativeDistance,
    "SmoothedNegativeDistance": SmoothedNegativeDistance,
}


def kernel_from_spec(spec: dict, box: BoundingBox) -> Kernel:
    variant = spec.get("variant")
    params = dict(spec.get("params", {}))
    if variant == "CpdShifted":
        base = kernel_from_spec(params["base"], box)
        return CpdShifted(base, params["anchor"])
    if variant == "SpectralKernel":
        from .discrepancy import SpectralKernel

        return SpectralKernel(params["alpha"], box)
    if variant not in _KERNEL_VARIANTS:
        raise ValueError(f"unknown kernel variant {variant!r}")
    return _KERNEL_VARIANTS[variant](box, **params)


def cost_from_spec(spec: dict, box: BoundingBox) -> Cost:
    variant = spec.get("variant")
    params = dict(spec.get("params", {}))
    if variant == "AbsDistance":
        return AbsDistance(box)
    if variant == "PowerDistance":
        return PowerDistance(box, **params)
    if variant == "NegatedKernel":
        return NegatedKernel(kernel_from_spec(params["kernel"], box))
    raise ValueError(f"unknown cost variant {variant!r}")
