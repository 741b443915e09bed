"""Log-domain solver: softmin, fixed point, limits, contraction, diagnostics."""
import math

import numpy as np
import pytest

from sinkdiv import (
    AbsDistance,
    BoundingBox,
    DiscreteMeasure,
    Gaussian,
    NegatedKernel,
    SinkhornConfig,
    contraction_estimate,
    dirac,
    exact_ot,
    ot_infinity,
    potential_lipschitz_check,
    softmin,
    solve,
    uniform,
)

from conftest import random_measure


# ---------------------------------------------------------------------------
# softmin operator
# ---------------------------------------------------------------------------

def test_softmin_single_atom_exact(unit_box):
    # integral against a Dirac: T(phi)(x) = c(x, y0) - phi(y0), any epsilon
    cost = AbsDistance(unit_box)
    m = dirac([0.4])
    phi = np.array([0.3])
    for eps in [1e-6, 1e-2, 1.0, 1e4]:
        out = softmin(cost, m, phi, eps, np.array([[0.9]]))
        assert out[0] == pytest.approx(abs(0.9 - 0.4) - 0.3, abs=1e-14)

def test_softmin_constant_exponent_exact(unit_box):
    # phi_j = c(x, y_j) - kappa0 makes the log-sum-exp argument constant
    cost = AbsDistance(unit_box)
    m = uniform(np.array([[0.1], [0.5], [0.8]]))
    x = np.array([[0.3]])
    kappa0 = 0.77
    phi = cost.matrix(x, m.points)[0] - kappa0
    for eps in [1e-4, 1.0, 1e3]:
        out = softmin(cost, m, phi, eps, x)
        assert out[0] == pytest.approx(kappa0, abs=1e-12)

def test_softmin_small_epsilon_approaches_min(unit_box):
    cost = AbsDistance(unit_box)
    m = uniform(np.array([[0.2], [0.9]]))
    phi = np.array([0.05, -0.1])
    x = np.array([[0.0]])
    hard = min(abs(0.0 - 0.2) - 0.05, abs(0.0 - 0.9) + 0.1)
    out = softmin(cost, m, phi, 1e-6, x)
    assert out[0] == pytest.approx(hard, abs=1e-5)

def test_softmin_ignores_zero_weight_atoms(unit_box):
    cost = AbsDistance(unit_box)
    with_zero = DiscreteMeasure(np.array([[0.2], [0.9]]), np.array([1.0, 0.0]))
    just_one = dirac([0.2])
    x = np.array([[0.6]])
    a = softmin(cost, with_zero, np.array([0.3, 5.0]), 0.5, x)
    b = softmin(cost, just_one, np.array([0.3]), 0.5, x)
    assert a[0] == b[0]


# ---------------------------------------------------------------------------
# solve: toy values
# ---------------------------------------------------------------------------

def test_self_dirac_trivial(unit_box):
    cost = AbsDistance(unit_box)
    m = dirac([0.3])
    sol = solve(cost, m, m, SinkhornConfig(epsilon=0.5))
    assert sol.value == pytest.approx(0.0, abs=1e-12)
    assert sol.plan.matrix.shape == (1, 1)
    assert sol.plan.matrix[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert sol.converged

def test_four_atom_small_epsilon(example_pair, unit_box):
    mu, nu = example_pair
    sol = solve(AbsDistance(unit_box), mu, nu, SinkhornConfig(epsilon=1e-4))
    assert sol.converged
    assert sol.value == pytest.approx(0.1, abs=5e-3)

def test_four_atom_large_epsilon(example_pair, unit_box):
    mu, nu = example_pair
    sol = solve(AbsDistance(unit_box), mu, nu, SinkhornConfig(epsilon=1e3))
    # independent double sum: (0.1 + 0.9 + 0.9 + 0.1) / 4 = 0.5
    assert sol.value == pytest.approx(0.5, abs=1e-3)

def test_not_converged_flagged(example_pair, unit_box):
    mu, nu = example_pair
    rng = np.random.default_rng(0)
    a = random_measure(rng, 20, unit_box)
    b = random_measure(rng, 20, unit_box)
    sol = solve(AbsDistance(unit_box), a, b, SinkhornConfig(epsilon=1e-4, max_iter=50))
    assert not sol.converged
    assert sol.iterations == 50
    assert sol.final_residual > 1e-10
    assert np.isfinite(sol.value)


# ---------------------------------------------------------------------------
# solver soundness on a battery of converged runs
# ---------------------------------------------------------------------------

def _battery(unit_box):
    rng = np.random.default_rng(1)
    cost = AbsDistance(unit_box)
    mu = random_measure(rng, 12, unit_box)
    nu = random_measure(rng, 9, unit_box)
    runs = []
    for eps in [1e-2, 0.1, 1.0, 10.0, 1e3]:
        runs.append(solve(cost, mu, nu, SinkhornConfig(epsilon=eps)))
        runs.append(solve(cost, mu, mu, SinkhornConfig(epsilon=eps)))
    return runs

def test_marginals_within_tolerance(unit_box):
    for sol in _battery(unit_box):
        assert sol.converged
        assert sol.plan.marginal_error() <= 1e-8

def test_duality_gap_at_convergence(unit_box):
    for sol in _battery(unit_box):
        assert sol.duality_gap <= 1e-6

def test_observed_contraction_bounded(unit_box):
    for sol in _battery(unit_box):
        hist = sol.residual_history
        if hist.size < 3:
            continue
        ratios = hist[2:] / hist[1:-1]
        # the averaged self-problem update contracts like (1 + kappa) / 2
        bound = sol.kappa if not np.array_equal(sol.plan.mu.points, sol.plan.nu.points) \
            else 0.5 * (1.0 + sol.kappa)
        assert np.all(ratios <= bound + 1e-6)

def test_normalization_constraint(unit_box):
    cost = AbsDistance(unit_box)
    rng = np.random.default_rng(2)
    mu = random_measure(rng, 10, unit_box)
    nu = random_measure(rng, 11, unit_box)
    for eps in [1e-2, 1.0, 100.0]:
        sol = solve(cost, mu, nu, SinkhornConfig(epsilon=eps))
        limits = ot_infinity(cost, mu, nu)
        assert float(sol.potentials.phi @ mu.weights) == pytest.approx(
            0.5 * limits.ot_inf, abs=1e-10
        )
        assert sol.potentials.normalized

def test_value_invariant_under_normalization(unit_box):
    cost = AbsDistance(unit_box)
    rng = np.random.default_rng(3)
    mu = random_measure(rng, 8, unit_box)
    nu = random_measure(rng, 8, unit_box)
    a = solve(cost, mu, nu, SinkhornConfig(epsilon=0.3, normalize=True))
    b = solve(cost, mu, nu, SinkhornConfig(epsilon=0.3, normalize=False))
    assert a.value == pytest.approx(b.value, abs=1e-12)
    assert np.allclose(a.plan.matrix, b.plan.matrix, atol=1e-12)

def test_shift_equivariance(unit_box):
    # seeding the iteration at a constant shifts the unnormalized pair by
    # opposite constants and leaves value and plan unchanged
    cost = AbsDistance(unit_box)
    rng = np.random.default_rng(4)
    mu = random_measure(rng, 7, unit_box)
    nu = random_measure(rng, 9, unit_box)
    cfg = SinkhornConfig(epsilon=0.2, normalize=False)
    base = solve(cost, mu, nu, cfg)
    shifted = solve(cost, mu, nu, cfg, psi0=np.full(len(nu), 0.37))
    assert shifted.value == pytest.approx(base.value, abs=1e-10)
    assert np.allclose(shifted.plan.matrix, base.plan.matrix, atol=1e-10)
    delta = shifted.potentials.psi - base.potentials.psi
    assert np.max(np.abs(delta - delta[0])) <= 1e-10
    assert np.allclose(shifted.potentials.phi - base.potentials.phi, -delta[0], atol=1e-10)


# ---------------------------------------------------------------------------
# monotonicity in the regularization strength
# ---------------------------------------------------------------------------

def test_value_monotone_in_epsilon(unit_box):
    cost = AbsDistance(unit_box)
    rng = np.random.default_rng(5)
    mu = random_measure(rng, 10, unit_box)
    nu = random_measure(rng, 10, unit_box)
    values = [
        solve(cost, mu, nu, SinkhornConfig(epsilon=float(e))).value
        for e in np.logspace(-2, 3, 8)
    ]
    assert np.all(np.diff(values) >= -1e-8)


# ---------------------------------------------------------------------------
# limits
# ---------------------------------------------------------------------------

def test_ot_infinity_four_atoms(example_pair, unit_box):
    mu, nu = example_pair
    limits = ot_infinity(AbsDistance(unit_box), mu, nu)
    assert limits.ot_inf == pytest.approx(0.5, abs=1e-15)
    assert limits.phi_inf[0] == pytest.approx(0.25, abs=1e-15)

def test_ot_infinity_self_dirac(unit_box):
    m = dirac([0.3])
    limits = ot_infinity(AbsDistance(unit_box), m, m)
    assert limits.ot_inf == 0.0
    assert np.array_equal(limits.phi_inf, np.zeros(1))
    assert np.array_equal(limits.psi_inf, np.zeros(1))

def test_ot_infinity_normalization_identity(unit_box):
    rng = np.random.default_rng(6)
    mu = random_measure(rng, 6, unit_box)
    nu = random_measure(rng, 8, unit_box)
    limits = ot_infinity(AbsDistance(unit_box), mu, nu)
    assert float(limits.phi_inf @ mu.weights) == pytest.approx(
        0.5 * limits.ot_inf, abs=1e-14
    )

def test_potentials_converge_to_limits(unit_box):
    # asymmetric toy; a mirror-symmetric instance has zero distance at all eps
    cost = AbsDistance(unit_box)
    mu = DiscreteMeasure(np.array([[0.1], [0.5]]), np.array([0.3, 0.7]))
    nu = DiscreteMeasure(np.array([[0.3], [0.95]]), np.array([0.5, 0.5]))
    limits = ot_infinity(cost, mu, nu)
    dists = []
    for eps in [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0]:
        sol = solve(cost, mu, nu, SinkhornConfig(epsilon=eps))
        dists.append(float(np.max(np.abs(sol.potentials.phi - limits.phi_inf))))
    assert all(b <= a for a, b in zip(dists, dists[1:]))
    assert dists[-1] < 1e-3

def test_value_converges_to_exact_from_above(unit_box):
    cost = AbsDistance(unit_box)
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
    nu = DiscreteMeasure(np.array([[0.1], [0.9]]), np.array([0.5, 0.5]))
    exact = exact_ot(cost, mu, nu).value
    values = []
    for eps in [1e-1, 1e-2, 1e-3, 1e-4]:
        sol = solve(cost, mu, nu, SinkhornConfig(epsilon=eps))
        assert sol.converged
        values.append(sol.value)
    gaps = np.array(values) - exact
    assert np.all(np.diff(gaps) <= 1e-12)
    assert gaps[-1] >= -1e-9
    assert gaps[-1] <= 1e-3

def test_small_epsilon_soft_dual_feasibility(example_pair, unit_box):
    mu, nu = example_pair
    cost = AbsDistance(unit_box)
    sol = solve(cost, mu, nu, SinkhornConfig(epsilon=1e-4))
    c_matrix = cost.matrix(mu.points, nu.points)
    violation = np.max(
        sol.potentials.phi[:, None] + sol.potentials.psi[None, :] - c_matrix
    )
    assert violation <= 1e-2


# ---------------------------------------------------------------------------
# contraction estimate and half-step regularity
# ---------------------------------------------------------------------------

def test_contraction_estimate_hand_value():
    box = BoundingBox(np.array([0.0]), np.array([1.0]))

    class UnitLipschitz(AbsDistance):
        def _lipschitz_bound(self):
            return 1.0

    est = contraction_estimate(UnitLipschitz(box), box, 1.0)
    assert est.kappa == pytest.approx(1.0 - math.exp(-2.0), abs=1e-12)
    assert est.kappa == pytest.approx(0.8646647167633873, abs=1e-12)

def test_contraction_estimate_limits(unit_box):
    cost = AbsDistance(unit_box)
    assert contraction_estimate(cost, unit_box, 1e12).kappa == pytest.approx(0.0, abs=1e-9)
    assert contraction_estimate(cost, unit_box, 1e-12).kappa == pytest.approx(1.0, abs=1e-12)

def test_half_step_inherits_cost_lipschitz(unit_box):
    rng = np.random.default_rng(7)
    m = random_measure(rng, 12, unit_box)
    for cost in [AbsDistance(unit_box), NegatedKernel(Gaussian(unit_box, c=0.4))]:
        phi = rng.normal(size=12)
        pairs = rng.random((1000, 2, 1))
        ratio = potential_lipschitz_check(cost, m, phi, 0.25, pairs)
        assert ratio <= cost.lipschitz + 1e-9

def test_half_step_range_bound(unit_box):
    cost = AbsDistance(unit_box)
    rng = np.random.default_rng(8)
    m = random_measure(rng, 6, unit_box)
    phi = rng.normal(size=6)
    xs = rng.random((40, 1))
    out = softmin(cost, m, phi, 0.5, xs)
    c_block = cost.matrix(xs, m.points)
    lo = np.min(c_block - phi[None, :], axis=1)
    hi = np.max(c_block - phi[None, :], axis=1)
    assert np.all(out >= lo - 1e-12)
    assert np.all(out <= hi + 1e-12)
