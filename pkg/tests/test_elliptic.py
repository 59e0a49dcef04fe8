from __future__ import annotations

import numpy as np
import pytest

from semiflow import elliptic as E
from semiflow.errors import ConfigurationRejected, PreconditionError

# Radial shooting for -u'' - (2/r) u' + u = 5 exp(-r^2) u^1.5, u'(0) = 0
# (scipy solve_ivp, rtol 1e-12, bisection on u(0) between the decaying
# and the sign-changing regimes).
SHOOT_U0 = 3.1286297868475144
SHOOT_PROFILE = {0.5: 2.3075002133884968, 1.0: 1.1306710457154632, 2.0: 0.23101898042166968, 4.0: 0.015650922688209074}

ZERO_B = E.constant(0.0)


@pytest.fixture(scope="module")
def small():
    return E.EllipticModel(R_max=16.0, grid_points=400)


def test_zero_is_stationary(small):
    tr = E.parabolic_evolve(small, np.zeros(400), 1.0)
    assert not np.any(tr.states)
    assert E.J7_eval(small, np.zeros(400)) == 0.0


def ground_mode(lin):
    """Lowest eigenpair of A_h via the V-symmetrized matrix."""
    d = np.sqrt(lin.V)
    w, vecs = np.linalg.eigh(d[:, None] * lin.A.toarray() / d[None, :])
    return float(w[0]), vecs[:, 0] / d


def test_linear_decay_against_eigendecomposition(small):
    lin = small.with_b(ZERO_B)
    u0 = np.exp(-small.r**2)
    nu1, _ = ground_mode(lin)
    tr = E.parabolic_evolve(lin, u0, 2.0, sample_dt=0.5, dt=1e-3, method="imex_ars222")
    norms = lin.norm_L2(tr.states)
    assert np.all(np.diff(norms) < 0)
    # L2 norm decays at least at the slowest rate nu1
    assert np.all(norms <= norms[0] * np.exp(-nu1 * tr.times) * (1 + 1e-6))
    assert nu1 > lin.a0


def test_bump_grows_where_f_dominates(small):
    u0 = 2.0 * np.exp(-(small.r**2))
    rhs = small.flow().rhs(u0, 0.0)
    assert rhs[0] > 0


def test_J_ground_mode_without_b(small):
    lin = small.with_b(ZERO_B)
    nu, phi = ground_mode(lin)
    assert abs(E.J7_eval(lin, phi) - 0.5 * nu * lin.norm_L2(phi) ** 2) <= 1e-10


def test_J_along_ray(small):
    w1 = E.first_eigenfunction(small)
    C = np.sum(small.V * small.b * w1**2.5) / 2.5
    for s in (0.5, 3.0, 10.0):
        assert abs(E.J7_eval(small, s * w1) - (0.5 * s * s - C * s**2.5)) <= 1e-10 * max(1, s**2.5)


def test_conditions(small):
    rep = E.validate_conditions(small)
    assert rep.passed and rep.results["F3"][1] <= 1e-12
    with pytest.raises(ConfigurationRejected):
        E.validate_conditions(E.EllipticModel(R_max=16.0, grid_points=400, gamma=1.5))
    dip = lambda r: 1.0 - np.exp(-((np.asarray(r) - 3.0) ** 2) * 100)  # noqa: E731
    with pytest.raises(ConfigurationRejected):
        E.validate_conditions(E.EllipticModel(R_max=16.0, grid_points=400, a_of_r=dip))


def test_mp_radius(small):
    mpr = E.mp_radius(small, 300, sphere_samples=300)
    assert mpr.passed and np.isfinite(mpr.rho) and mpr.barrier >= 0.25 * mpr.rho**2 - 1e-9
    with pytest.raises(ConfigurationRejected):
        E.mp_radius(small.with_b(ZERO_B), 30)


def test_mp_radius_homogeneity(small):
    a = E.mp_radius(small, 300, sphere_samples=50)
    b = E.mp_radius(small.with_b(E.gaussian_weight(10.0)), 300, sphere_samples=50)
    assert abs(b.c5_hat / a.c5_hat - 2) <= 1e-12
    assert abs(b.rho / a.rho - 2 ** (-1 / small.gamma)) <= 1e-12


def test_find_s1(small):
    w1 = E.first_eigenfunction(small)
    s1 = E.find_s1(small, w1)
    C = np.sum(small.V * small.b * w1**2.5) / 2.5
    assert E.J7_eval(small, s1 * w1) <= 0
    assert s1 <= 2 * (2.5 / (2 * C)) ** (1 / 0.5)
    assert E.find_s1(small.with_b(E.gaussian_weight(5 * 2**2.5)), w1) < s1
    with pytest.raises(ConfigurationRejected):
        E.find_s1(small.with_b(ZERO_B), w1, s_max=1e3)


def test_cone_invariance(small):
    rng = np.random.default_rng(0)
    seeds = [np.abs(rng.normal()) * np.exp(-((small.r - rng.uniform(0, 4)) ** 2)) for _ in range(20)]
    assert E.cone_invariance_check(small, seeds, 1.0).passed
    assert E.cone_invariance_check(small.with_b(ZERO_B), [np.exp(-small.r**2)], 1.0).passed
    assert E.cone_invariance_check(small, [np.zeros(400)], 1.0).min_entry == 0.0
    with pytest.raises(PreconditionError):
        E.cone_invariance_check(small, [-np.ones(400)], 1.0)


def test_dissipativity(small):
    zero = E.parabolic_evolve(small, np.zeros(400), 1.0)
    assert E.dissipativity_check(small, zero, 10.0).worst_margin == 0.0
    tr = E.parabolic_evolve(small, 3.0 * np.exp(-small.r**2), 2.0, dt=1e-3)
    assert E.dissipativity_check(small, tr, 10.0).passed


def test_linear_dissipativity_equality(small):
    lin = small.with_b(ZERO_B)
    tr = E.parabolic_evolve(lin, np.exp(-small.r**2), 0.5, dt=1e-4, method="imex_ars222")
    L2 = lin.norm_L2(tr.states) ** 2
    dL2 = np.diff(L2) / np.diff(tr.times)
    mid = 0.5 * (tr.states[1:] + tr.states[:-1])
    np.testing.assert_allclose(dL2, -2 * lin.norm_X(mid) ** 2, rtol=1e-6)


def test_energy_identity_equilibrium_and_linear(small):
    eq = E.parabolic_evolve(small, np.zeros(400), 0.5)
    rep = E.energy_identity_check(small, eq)
    assert not np.any(rep.lhs) and not np.any(rep.rhs)
    lin = small.with_b(ZERO_B)
    nu, phi = ground_mode(lin)
    tr = E.parabolic_evolve(lin, phi, 0.3, dt=1e-4, method="imex_ars222")
    rep = E.energy_identity_check(lin, tr)
    tm = 0.5 * (tr.times[1:] + tr.times[:-1])
    exact = nu**2 * lin.norm_L2(phi) ** 2 * np.exp(-2 * nu * tm)
    np.testing.assert_allclose(rep.rhs, exact, rtol=1e-6)
    np.testing.assert_allclose(rep.lhs, exact, rtol=1e-6)


def test_energy_identity_canonical_transient(small):
    e1, e2, order = E.energy_identity_convergence(small, 3.0 * np.exp(-small.r**2), 0.5, dt=1e-3)
    assert e1.rel_error <= 1e-2 and e2.rel_error < e1.rel_error and order >= 1


def test_imex_euler_keeps_J_monotone(small):
    tr = E.parabolic_evolve(small, 3.0 * np.exp(-small.r**2), 3.0)
    J = E.J7_eval(small, tr.states)
    assert np.all(np.diff(J) <= 1e-12)
    assert tr.states.min() >= 0


def test_band_sampler_hits_band(small):
    band = E.EnergyBand(-10.0, 10.0)
    xs = E.band_sampler(small, band)(small.flow(), 4.0, 5, np.random.default_rng(0))
    for x in xs:
        assert -10 <= E.J7_eval(small, x) <= 10
        assert small.norm_X(x) > 4.0


def test_zero_b_search_rejected(small):
    with pytest.raises(ConfigurationRejected):
        E.positive_solution_search(small.with_b(ZERO_B), trial_count=30)


def test_grid_refinement_second_order():
    errs = []
    for N in (600, 1200):
        m = E.EllipticModel(grid_points=N)
        sol = E.positive_solution_search(m, trial_count=200)
        assert sol.passed
        r = np.array(sorted(SHOOT_PROFILE))
        errs.append(np.max(np.abs(np.interp(r, m.r, sol.u_star) - [SHOOT_PROFILE[x] for x in r])))
    assert errs[0] / errs[1] >= 3.0
