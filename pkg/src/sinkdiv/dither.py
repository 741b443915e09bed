"""Dithering: approximate a target measure by M equal-weight atoms.

Minimizes the Sinkhorn divergence between the target and the empirical
measure of the atom positions (finite regularization via envelope gradients
through the converged plans; infinite regularization via the analytic
attraction-repulsion gradient), using projected gradient descent with Armijo
backtracking onto the bounding box.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .discrepancy import discrepancy as kernel_discrepancy
from .discrepancy import halftoning_energy
from .errors import NotNegatedKernelError
from .kernels import (
    AbsDistance,
    Cost,
    NegatedKernel,
    NegativeDistance,
    PowerDistance,
    ShiftedNegativeDistance,
    SmoothedNegativeDistance,
)
from .measures import DiscreteMeasure, uniform
from .sinkhorn import SinkhornConfig, solve


@dataclass(frozen=True)
class DitherConfig:
    """Configuration of one dithering run.

    epsilon may be math.inf for the pure-discrepancy objective. Costs with a
    distance kink at coincident points are replaced by the smoothed
    negative-distance kernel (width `smoothing`) at resolution time, since the
    line search needs a gradient everywhere.
    """

    M: int
    epsilon: float
    cost: Cost
    max_outer_iter: int = 500
    grad_tol: float = 1e-6
    initial_step: float = 1.0
    backtrack: float = 0.5
    sufficient_decrease: float = 1e-4
    seed: int = 0
    inner_tol: float = 1e-9
    inner_max_iter: int = 10_000
    smoothing: float = 1e-2

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive (math.inf allowed)")


@dataclass
class DitherState:
    """Final positions plus the full optimization trace."""

    positions: np.ndarray
    energy: float
    grad: np.ndarray
    trace: list = field(repr=False)
    converged: bool = False
    line_search_failed: bool = False


def resolve_cost(cfg: DitherConfig) -> Cost:
    """Replace distance-family costs by the smoothed variant; keep the rest."""
    cost = cfg.cost
    box = cost.box
    if isinstance(cost, AbsDistance) or (isinstance(cost, PowerDistance) and cost.p == 1.0):
        return NegatedKernel(SmoothedNegativeDistance(box, c=cfg.smoothing))
    if isinstance(cost, NegatedKernel) and isinstance(
        cost.kernel, (NegativeDistance, ShiftedNegativeDistance)
    ):
        return NegatedKernel(SmoothedNegativeDistance(box, c=cfg.smoothing))
    return cost


def _check_sampling_ratio(cfg: DitherConfig, target: DiscreteMeasure):
    if len(target) < 10 * cfg.M:
        warnings.warn(
            f"target has {len(target)} atoms for M = {cfg.M}; sampling below 10x "
            "the atom count tends to cluster the dithered measure",
            stacklevel=3,
        )


def _inner_config(cfg: DitherConfig) -> SinkhornConfig:
    return SinkhornConfig(
        epsilon=cfg.epsilon,
        max_iter=cfg.inner_max_iter,
        tol=cfg.inner_tol,
        normalize=False,
    )


def objective(cfg: DitherConfig, target: DiscreteMeasure, positions) -> float:
    """S_eps(target, nu_p) for the uniform measure nu_p on the positions.

    The infinite-regularization branch evaluates half the squared discrepancy
    directly, which includes the constant target self-term, so both branches
    measure the same functional.
    """
    cost = resolve_cost(cfg)
    positions = np.asarray(positions, dtype=float)
    nu_p = uniform(positions)
    if math.isinf(cfg.epsilon):
        kernel = _kernel_of(cost)
        return 0.5 * kernel_discrepancy(kernel, target, nu_p).squared
    inner = _inner_config(cfg)
    cross = solve(cost, target, nu_p, inner)
    self_target = solve(cost, target, target, inner)
    self_p = solve(cost, nu_p, nu_p, inner)
    return cross.value - 0.5 * self_target.value - 0.5 * self_p.value


def gradient(cfg: DitherConfig, target: DiscreteMeasure, positions) -> np.ndarray:
    """Gradient of the objective with respect to the atom positions, shape (M, d)."""
    cost = resolve_cost(cfg)
    positions = np.asarray(positions, dtype=float)
    if math.isinf(cfg.epsilon):
        return _gradient_infinite(cost, target, positions)
    inner = _inner_config(cfg)
    nu_p = uniform(positions)
    cross = solve(cost, target, nu_p, inner)
    self_p = solve(cost, nu_p, nu_p, inner)
    return _envelope_gradient(cost, target, positions, cross.plan.matrix, self_p.plan.matrix)


def _kernel_of(cost: Cost):
    if not isinstance(cost, NegatedKernel):
        raise NotNegatedKernelError(
            "the infinite-regularization objective requires a kernel-backed cost"
        )
    return cost.kernel


def _gradient_infinite(cost: Cost, target: DiscreteMeasure, positions: np.ndarray) -> np.ndarray:
    kernel = _kernel_of(cost)
    m_count = positions.shape[0]
    grads_pp = kernel.pairwise_grad_y(positions, positions)
    grads_tp = kernel.pairwise_grad_y(target.points, positions)
    repulsion = grads_pp.sum(axis=0) / (m_count * m_count)
    attraction = np.einsum("a,ajk->jk", target.weights, grads_tp) / m_count
    return repulsion - attraction


def _envelope_gradient(
    cost: Cost,
    target: DiscreteMeasure,
    positions: np.ndarray,
    plan_cross: np.ndarray,
    plan_self: np.ndarray,
) -> np.ndarray:
    # Dual values differentiated only through the cost entries, potentials
    # held fixed at their converged values. The half on the self term cancels
    # because each position appears in both marginals of the symmetric plan.
    grads_cross = cost.pairwise_grad_y(target.points, positions)
    grads_self = cost.pairwise_grad_y(positions, positions)
    term_cross = np.einsum("ij,ijk->jk", plan_cross, grads_cross)
    term_self = np.einsum("ij,ijk->jk", plan_self, grads_self)
    return term_cross - term_self


class _Run:
    """Shared state of one dithering run: warm starts and the constant self term."""

    def __init__(self, cfg: DitherConfig, target: DiscreteMeasure):
        self.cfg = cfg
        self.cost = resolve_cost(cfg)
        self.target = target
        self.finite = not math.isinf(cfg.epsilon)
        if self.finite:
            self.inner = _inner_config(cfg)
            # constant in the positions, solved once
            self.self_target_value = solve(self.cost, target, target, self.inner).value
            self.psi_cross = None
            self.phi_self = None
        else:
            self.kernel = _kernel_of(self.cost)
            # constant target self-term of the squared discrepancy
            gram_tt = self.kernel.gram(target.points, target.points)
            self.target_self = 0.5 * float(target.weights @ gram_tt @ target.weights)

    def energy_and_plans(self, positions: np.ndarray, keep_warm: bool):
        nu_p = uniform(positions)
        if not self.finite:
            value = halftoning_energy(self.kernel, self.target, positions) + self.target_self
            return value, None, None
        cross = solve(self.cost, self.target, nu_p, self.inner, psi0=self.psi_cross)
        self_p = solve(self.cost, nu_p, nu_p, self.inner, psi0=self.phi_self)
        if keep_warm:
            self.psi_cross = cross.potentials.psi
            self.phi_self = self_p.potentials.phi
        value = cross.value - 0.5 * self.self_target_value - 0.5 * self_p.value
        return value, cross.plan.matrix, self_p.plan.matrix

    def gradient_at(self, positions: np.ndarray, plan_cross, plan_self) -> np.ndarray:
        if not self.finite:
            return _gradient_infinite(self.cost, self.target, positions)
        return _envelope_gradient(self.cost, self.target, positions, plan_cross, plan_self)


def dither(cfg: DitherConfig, target: DiscreteMeasure) -> DitherState:
    """Projected gradient descent with Armijo backtracking from seeded positions.

    Stops on the gradient tolerance, the outer iteration cap, or a line-search
    step underflow (below 1e-14, recorded in the state, not fatal). The energy
    trace is non-increasing by construction.
    """
    _check_sampling_ratio(cfg, target)
    box = cfg.cost.box
    rng = np.random.default_rng(cfg.seed)
    positions = box.lower + rng.random((cfg.M, box.dim)) * (box.upper - box.lower)

    run = _Run(cfg, target)
    energy, plan_cross, plan_self = run.energy_and_plans(positions, keep_warm=True)
    grad = run.gradient_at(positions, plan_cross, plan_self)
    grad_norm = float(np.max(np.abs(grad)))
    trace = [{"iter": 0, "energy": energy, "grad_norm": grad_norm, "step": 0.0}]
    converged = grad_norm <= cfg.grad_tol
    failed = False

    it = 0
    last_step = cfg.initial_step
    while not converged and it < cfg.max_outer_iter:
        it += 1
        # start from twice the last accepted step; Armijo backtracking still
        # guards every move, so the trace stays monotone
        step = 2.0 * last_step
        accepted = False
        while step >= 1e-14:
            candidate = np.clip(positions - step * grad, box.lower, box.upper)
            if not np.any(candidate != positions):
                # projection absorbs the whole step: stationary on the boundary
                converged = True
                break
            cand_energy, cand_cross, cand_self = run.energy_and_plans(candidate, keep_warm=True)
            decrease = float(np.sum(grad * (candidate - positions)))
            if cand_energy <= energy + cfg.sufficient_decrease * decrease:
                accepted = True
                break
            step *= cfg.backtrack
        if converged:
            break
        if not accepted:
            failed = True
            break
        last_step = step
        positions, energy = candidate, cand_energy
        grad = run.gradient_at(positions, cand_cross, cand_self)
        grad_norm = float(np.max(np.abs(grad)))
        trace.append({"iter": it, "energy": energy, "grad_norm": grad_norm, "step": step})
        converged = grad_norm <= cfg.grad_tol

    return DitherState(
        positions=positions,
        energy=energy,
        grad=grad,
        trace=trace,
        converged=converged,
        line_search_failed=failed,
    )
