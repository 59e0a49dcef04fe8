from __future__ import annotations

import numpy as np
import pytest

from semiflow import resonant as RS
from semiflow.errors import ConfigurationRejected, PreconditionError

# Reference values from scipy.integrate.quad (epsabs = epsrel = 1e-14):
#   (2/pi) int_0^pi 2 arctan(sin x) sin(kx) dx for k = 1, 3
#   -int_0^pi F(s sin 2x) dx with F(s) = 2 s arctan s - log(1 + s^2)
PROJ_ARCTAN_E1 = {1: 1.6568542494923804, 3: 0.09475708248730023}
J_ARCTAN_S_E2 = {0.5: -0.38134457850882664, 1.5: -2.923645247164518, 4.0: -13.713001563830101}

QP = RS.ForcingSignal((1.0, 2**0.5), (0.25, 0.25))


def model(f="arctan2", forcing=RS.ZERO_FORCING, m=16):
    return RS.SpectralModel(m, 4.0, f, forcing)


def test_linear_diagonal_and_kernel():
    m = model("zero")
    for k in (1, 2, 5):
        np.testing.assert_array_equal(RS.galerkin_rhs(m, m.unit(k)), -(m.lam[k - 1] - 4) * m.unit(k))
    assert not np.any(RS.galerkin_rhs(m, m.unit(2)))


def test_galerkin_against_quadrature():
    rhs = RS.galerkin_rhs(model(), model().unit(1))
    assert abs(rhs[0] - (3 + PROJ_ARCTAN_E1[1])) <= 1e-8
    assert abs(rhs[2] - PROJ_ARCTAN_E1[3]) <= 1e-8
    assert abs(rhs[1]) <= 1e-12  # odd symmetry about pi/2


def test_mu_must_be_eigenvalue():
    with pytest.raises(ConfigurationRejected):
        RS.SpectralModel(8, 5.0)


def test_projections():
    m = model()
    np.testing.assert_array_equal(RS.project(m, m.unit(1), "minus"), m.unit(1))
    np.testing.assert_array_equal(RS.project(m, m.unit(2), "zero"), m.unit(2))
    u = np.arange(1.0, 17.0)
    assert not np.any(RS.project(m, RS.project(m, u, "plus"), "minus"))
    with pytest.raises(ValueError):
        RS.project(m, u, "middle")


def test_J_examples():
    assert RS.J_eval(model(), np.zeros(16)) == 0.0
    assert abs(RS.J_eval(model("zero"), model().unit(3)) - 5 * np.pi / 4) <= 1e-12
    for s, ref in J_ARCTAN_S_E2.items():
        assert abs(RS.J_eval(model(), s * model().unit(2)) - ref) <= 1e-8


def test_J_vectorized():
    rng = np.random.default_rng(0)
    U = rng.normal(size=(7, 16))
    np.testing.assert_allclose(RS.J_eval(model(), U), [RS.J_eval(model(), u) for u in U], rtol=1e-13)


def test_landesman_lazer():
    assert RS.landesman_lazer_margins(model()) == (np.pi, np.pi)
    m1, m2 = RS.landesman_lazer_margins(model(forcing=QP))
    assert abs(m1 - (np.pi - 0.5)) <= 1e-6 and abs(m2 - (np.pi - 0.5)) <= 1e-6
    with pytest.raises(ConfigurationRejected):
        RS.landesman_lazer_margins(model(), RS.ForcingSignal((1.0,), (np.pi,)))


def test_kappa():
    s = np.linspace(-1e3, 1e3, 4001)
    kappa, c0, rep = RS.kappa_bound_check(model(), s)
    assert kappa == np.pi / 2 and np.isfinite(c0) and rep.passed
    assert RS.kappa_bound_check(model("tanh"), s)[0] == 0.5
    with pytest.raises(ConfigurationRejected):
        RS.kappa_bound_check(model("zero"), s)


def test_thresholds():
    th = RS.invariance_thresholds(model(forcing=QP), samples=4000)
    assert th.mu_plus == 9 and th.lam == 2.5
    assert abs(th.level - 3 * np.pi**1.5) <= 1e-12
    assert abs(th.rho1 - 3.8727329533706789) <= 1e-9
    assert th.c1 <= th.c1_bound
    assert th.min_margin > 0


def test_invariance_kernel_sample_stays():
    m = model("zero")
    th = RS.invariance_thresholds(m, samples=200)
    rep = RS.invariant_region_check(m, None, 10.0, 1.0, [m.unit(2)], 5.0, thresholds=th)
    assert rep.passed and rep.max_J_margin == -10.0


def test_invariance_large_plus_decays():
    m = model(forcing=QP)
    u = 4.9 * m.unit(3) / m.norm_V(m.unit(3))
    rep = RS.invariant_region_check(m, None, 30.0, 5.0, [u], 20.0)
    assert rep.passed and rep.max_envelope_excess <= 1e-6


def test_invariance_thresholds_enforced():
    m = model(forcing=QP)
    with pytest.raises(PreconditionError):
        RS.invariant_region_check(m, None, 30.0, 1.0, [np.zeros(16)], 1.0)


def rec(t, x):
    return np.asarray(t, float), np.asarray(x, float).reshape(len(t), -1)


def test_bebutov_basic():
    t = np.linspace(-6, 6, 121)
    u = rec(t, np.sin(t))
    assert RS.bebutov_distance(u, u) == (0.0, 2**-5)
    for d in (0.1, 1.0, 7.0):
        got, _ = RS.bebutov_distance(u, rec(t, np.sin(t) + d))
        assert abs(got - (1 - 2**-5) * d / (1 + d)) <= 1e-12
    assert RS.bebutov_distance(u, rec(t, 1e9 * np.cos(t)))[0] <= 1


def test_bebutov_short_record():
    t = np.linspace(-2, 2, 41)
    with pytest.raises(PreconditionError):
        RS.bebutov_distance(rec(t, t), rec(t, t))


def test_recurrence_constant_and_periodic():
    t = np.arange(0, 400.01, 0.1)
    r = RS.recurrence_test(rec(t, np.ones_like(t)), 1e-6, [1.0, 10.0])
    assert r.passed and r.smallest_l == 1.0
    p = 7.3
    r = RS.recurrence_test(rec(t, np.sin(2 * np.pi * t / p)), 0.05, [5.0, p + 0.1, 20.0])
    assert r.passed and r.smallest_l == p + 0.1
    assert r.rows[0][2] <= p + 0.1


def test_recurrence_noise_fails():
    t = np.arange(0, 400.01, 0.1)
    x = np.random.default_rng(1).normal(size=t.size)
    r = RS.recurrence_test(rec(t, x), 0.05, [10.0, 50.0, 100.0])
    assert not r.passed and r.smallest_l is None


def test_recurrence_defect_consistent_with_test():
    t = np.arange(0, 400.01, 0.1)
    r = rec(t, np.sin(t) + np.sin(2**0.5 * t))
    eps = RS.recurrence_defect(r, 50.0)
    assert RS.recurrence_test(r, eps * 1.01, [50.0]).passed


def test_bounded_search_unforced_converges():
    m = model()
    bs = RS.bounded_solution_search(m, None, [np.full(16, 0.1)], 200.0, 300.0)
    assert bs.sup_norm <= 1e-6 or np.ptp(bs.record.states[-100:], axis=0).max() <= 1e-9
    assert RS.recurrence_test(bs.record, 1e-6, [10.0, 50.0]).passed


def test_bounded_search_small_forcing_stays_small():
    m = model(forcing=RS.ForcingSignal((1.0, 2**0.5), (0.01, 0.01)))
    bs = RS.bounded_solution_search(m, None, [np.zeros(16)], 100.0, 300.0)
    assert bs.sup_norm <= 0.05 and bs.defect <= 1e-4


def test_flow_model_matches_galerkin():
    m = model(forcing=QP)
    fm = RS.flow_model(m)
    u = np.linspace(-1, 1, 16)
    np.testing.assert_allclose(fm.rhs(u, 0.7), RS.galerkin_rhs(m, u, RS.HullShift(), 0.7), atol=1e-13)
    fm2 = RS.flow_model(m, RS.HullShift(0.5))
    np.testing.assert_allclose(fm2.rhs(u, 0.2), RS.galerkin_rhs(m, u, RS.HullShift(), 0.7), atol=1e-13)
