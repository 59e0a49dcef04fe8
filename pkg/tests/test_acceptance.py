"""End-to-end acceptance runs at the stated tolerances, one test per target."""

from __future__ import annotations

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from semiflow import elliptic as E
from semiflow import models as M
from semiflow import resonant as RS
from semiflow.cli import main
from semiflow.config import load
from semiflow.experiments import (
    bebutov_axioms,
    hopf_circle_distance,
    mountain_pass_setup,
    quotient_examples,
    saddle_exit_check,
    semigroup_sweep,
)
from semiflow.flow import omega_limit
from semiflow.linking import invariant_candidates, minimax_estimate
from semiflow.regions import whole_space
from semiflow.wazewski import stability_at_infinity_probe

SHOOT_U0 = 3.1286297868475144  # bisection on u(0), see test_elliptic


def shooting_profile(r):
    """u(r) of -u'' - (2/r) u' + u = 5 exp(-r^2) u^1.5 from the frozen u(0)."""

    def rhs(s, y):
        return [y[1], -2 / s * y[1] + y[0] - 5 * np.exp(-s * s) * np.abs(y[0]) ** 1.5]

    r0 = 1e-8
    sol = solve_ivp(rhs, [r0, r[-1]], [SHOOT_U0, 0.0], t_eval=r, rtol=1e-12, atol=1e-14, method="DOP853")
    return sol.y[0]


def run_mountain_pass(problem):
    p = load("mountain-pass").params
    model, phi, path, saddle, value = mountain_pass_setup(problem, p["mp.path_nodes"], p["mp.max_gap"])
    t0 = time.perf_counter()
    c, recs, final = minimax_estimate(model, phi, path, 500, p["mp.dt"], p["mp.stall_tol"])
    elapsed = time.perf_counter() - t0
    cands = invariant_candidates(model, phi, final, c, p["mp.band"], p["mp.residual_tol"])
    return c, value, recs, cands, saddle, elapsed


def test_mountain_pass_value_1d():
    c, value, recs, cands, _, elapsed = run_mountain_pass("double-well")
    assert abs(c - 1.0) <= 1e-3
    assert len(recs) - 1 <= 500
    assert elapsed < 10.0


def test_mountain_pass_value_2d():
    c, _, _, cands, saddle, _ = run_mountain_pass("quartic2d")
    assert abs(c - 0.0) <= 1e-3
    assert min(np.linalg.norm(x - saddle) for x, _ in cands) <= 1e-2


def test_semigroup_and_hopf_limit_cycle():
    worst, applicable, failures = semigroup_sweep(100, seed=0)
    assert not failures and applicable > 0
    assert worst <= 10 * M.hopf().abs_tol
    w = 2 * np.pi + 0.1
    est = omega_limit(M.hopf(), [0.5, 0.0], 30.0, w, 5e-4, sample_dt=w / 20000)
    assert hopf_circle_distance(est.points) <= 1e-3


def test_quotient_flow_contract():
    q = quotient_examples()
    assert not q["interior"].collapsed
    assert q["collapsed"].collapsed and abs(q["collapsed"].collapse_time - 1) <= 1e-6
    assert q["interior_dev"] <= 10 * M.unit_speed().abs_tol
    assert q["absorbing"]
    assert q["blowup"].collapsed and abs(q["blowup"].collapse_time - 1) <= 1e-4


def test_exit_set_verification():
    good, wrong = saddle_exit_check()
    assert good.checked == 100 and good.tol == 100 * M.saddle().abs_tol
    assert good.passed and not good.violations
    assert not wrong.passed and wrong.violations[0].trajectory is not None


@pytest.fixture(scope="module")
def resonant_setup():
    p = load("resonant").params
    g = RS.ForcingSignal(p["resonant.g.frequencies"], p["resonant.g.amplitudes"])
    model = RS.SpectralModel(16, 4.0, "arctan2", g)
    return model, p


def test_resonant_invariant_region(resonant_setup):
    model, p = resonant_setup
    assert model.forcing.sup_g <= 0.5 + 1e-12
    RS.landesman_lazer_margins(model)
    t0 = time.perf_counter()
    samples = RS.sample_region(model, p["resonant.c"], p["resonant.rho"], 200, seed=0)
    rep = RS.invariant_region_check(model, None, p["resonant.c"], p["resonant.rho"], samples, 100.0, 1e-6)
    assert rep.samples == 200
    assert not rep.violations and rep.exploded == 0
    assert rep.max_envelope_excess <= 1e-6
    assert time.perf_counter() - t0 < 300


def test_recurrent_solution_exhibit(resonant_setup):
    model, p = resonant_setup
    c = p["resonant.c"]
    seeds = RS.sample_region(model, c, p["resonant.rho"], 2, seed=0)
    bs = RS.bounded_solution_search(model, None, seeds, 1e3, 1e4, c=c)
    assert np.isfinite(bs.sup_norm)
    assert -c <= bs.J_range[0] and bs.J_range[1] <= c
    rt = RS.recurrence_test(bs.record, 0.05, [10.0, 25.0, 50.0, 100.0], 5, model.norm_V)
    assert rt.passed and rt.smallest_l <= 100


@pytest.fixture(scope="module")
def elliptic_run():
    model = E.EllipticModel()
    t0 = time.perf_counter()
    sol = E.positive_solution_search(model)
    return model, sol, time.perf_counter() - t0


def test_elliptic_positive_solution(elliptic_run):
    model, sol, elapsed = elliptic_run
    assert model.grid_points >= 400
    u = sol.u_star
    assert u.min() >= 0 and model.norm_X(u) > 0
    assert sol.residual <= 1e-6
    assert 0.25 * sol.diagnostics["rho"] ** 2 - 1e-3 <= sol.J_value <= sol.c + 1e-3
    near = model.r <= 10.0
    ref = shooting_profile(model.r[near])
    assert np.max(np.abs(u[near] - ref)) <= 1e-3
    assert np.max(u[~near]) <= 1e-3
    assert elapsed < 300


def canonical_transient(model):
    return 3.0 * np.exp(-model.r**2)


def test_energy_identity(elliptic_run):
    model = elliptic_run[0]
    e1, e2, order = E.energy_identity_convergence(model, canonical_transient(model), 0.5, dt=1e-3)
    assert e1.rel_error <= 1e-2
    assert e2.rel_error < e1.rel_error and order >= 1


def test_dissipativity_and_stability_table(elliptic_run):
    model = elliptic_run[0]
    c = 10.0
    band = E.EnergyBand(-c, c)
    region = band.region(model)
    trajs = [
        E.parabolic_evolve(model, canonical_transient(model), 0.5, dt=1e-3, method="imex_ars222"),
        E.parabolic_evolve(model, canonical_transient(model), 2.0, dt=1e-3),
    ]
    sampler = E.band_sampler(model, band)
    for x in sampler(model.flow(), 4.0, 3, np.random.default_rng(1)):
        trajs.append(E.parabolic_evolve(model, x, 5.0, region=region))
    for tr in trajs:
        assert E.dissipativity_check(model, tr, c, tol=1e-6).passed
    table = stability_at_infinity_probe(
        model.flow(), region, [1.0, 2.0, 4.0], [2.0, 4.0, 8.0, 16.0], 4, 5.0, sampler=sampler, seed=0
    )
    assert table.rows and table.monotone()
    assert any(R is not None for _, R, _, _ in table.rows)


def test_bebutov_metric():
    sym, tri, closed = bebutov_axioms(1000, seed=0)
    assert sym == 0.0
    assert tri <= 1e-12
    assert closed <= 1e-12


def test_determinism(tmp_path):
    runs = [("verify", []), ("mountain-pass", []), ("quotient-demo", []), ("stability-probe", []), ("resonant", []), ("elliptic", [])]
    for exp, extra in runs:
        outs = []
        for k in range(2):
            out = tmp_path / f"{exp}-{k}"
            assert main([exp, "--out", str(out), "--seed", "7", *extra]) == 0
            outs.append(out)
        a, b = (sorted(p.name for p in o.iterdir()) for o in outs)
        assert a == b
        for name in a:
            x, y = (o / name for o in outs)
            if name == "report.txt":
                x, y = (timing_free(p) for p in (x, y))
                assert x == y, exp
            else:
                assert x.read_bytes() == y.read_bytes(), f"{exp}/{name}"


def timing_free(path):
    keep = [ln for ln in path.read_text().splitlines() if "wall_clock" not in ln and ".seconds:" not in ln]
    return "\n".join(keep)
