from __future__ import annotations

import numpy as np
import pytest

from semiflow import models as M
from semiflow.errors import DimensionMismatch, PreconditionError, UnboundedTail
from semiflow.flow import (
    ESCAPED,
    EXPLODED,
    FlowModel,
    attraction_probe,
    check_semigroup,
    distance_to_set,
    escape_time,
    evolve,
    evolve_batch,
    lyapunov_monotonicity,
    omega_limit,
)
from semiflow.regions import ball, interval, whole_space


def test_decay_closed_form():
    tr = evolve(M.decay(), [1.0], np.log(2))
    assert abs(tr.final[0] - 0.5) <= 1e-9


def test_quadratic_blowup_time():
    # x(t) = 1/(1-t) reaches 1e6 at t = 1 - 1e-6
    tr = evolve(M.quadratic_blowup(), [1.0], 2.0)
    assert tr.status.kind == EXPLODED
    assert abs(tr.status.time - (1 - 1e-6)) <= 1e-8


def test_zero_horizon_is_identity():
    tr = evolve(M.hopf(), [0.3, -0.2], 0.0)
    assert len(tr) == 1
    np.testing.assert_array_equal(tr.final, [0.3, -0.2])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        evolve(M.hopf(), [1.0], 1.0)


def test_negative_horizon_rejected():
    with pytest.raises(PreconditionError):
        evolve(M.decay(), [1.0], -1.0)


def test_sample_grid():
    tr = evolve(M.decay(), [1.0], 1.0, sample_dt=0.25)
    np.testing.assert_allclose(tr.times, [0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
    np.testing.assert_allclose(tr.states[:, 0], np.exp(-tr.times), atol=1e-9)


def test_semigroup_identity_case():
    assert check_semigroup(M.hopf(), [0.4, 0.1], 0.0, 0.7).deviation == 0.0


def test_semigroup_decay_and_hopf():
    assert check_semigroup(M.decay(), [1.0], 1.0, 1.0).passed
    rng = np.random.default_rng(3)
    for _ in range(5):
        assert check_semigroup(M.hopf(), rng.uniform(-1, 1, 2), 0.3, 0.7).passed


def test_hopf_radius_closed_form():
    tr = evolve(M.hopf(), [0.1, 0.0], 5.0, sample_dt=0.5)
    r = np.linalg.norm(tr.states, axis=1)
    np.testing.assert_allclose(r, M.hopf_radius(0.1, tr.times), atol=1e-8)


def test_escape_time_examples():
    e = escape_time(M.unit_speed(), [0.0], interval(0, 2), 5.0)
    assert e.finite and abs(e.time - 2) <= 1e-8
    e = escape_time(M.decay(), [0.5], interval(-1, 1), 5.0)
    assert e.kind == "not_before" and e.time == 5.0
    e = escape_time(M.quadratic_blowup(blow_up_norm=1e9), [1.0], interval(-1e6, 1e6), 2.0)
    assert e.finite and abs(e.time - (1 - 1e-6)) <= 1e-8


def test_escape_time_outside_region():
    with pytest.raises(PreconditionError):
        escape_time(M.decay(), [3.0], interval(-1, 1), 1.0)


def test_region_escape_takes_precedence_over_blowup():
    # leaves |u| <= 2 at t = 1/2, before the blow-up at t = 1
    tr = evolve(M.quadratic_blowup(), [1.0], 2.0, region=interval(-2, 2))
    assert tr.status.kind == ESCAPED
    assert abs(tr.status.time - 0.5) <= 1e-8


def test_omega_limit_sink_and_saddle():
    est = omega_limit(M.decay(), [1.0], 40.0, 1.0, 1e-6)
    assert len(est.points) == 1 and abs(est.points[0, 0]) <= 1e-6
    est = omega_limit(M.saddle(), [0.0, 1.0], 40.0, 1.0, 1e-6)
    assert len(est.points) == 1 and np.linalg.norm(est.points[0]) <= 1e-6


def test_omega_limit_hopf_circle():
    w = 2 * np.pi + 0.1
    est = omega_limit(M.hopf(), [0.1, 0.0], 30.0, w, 5e-4, sample_dt=w / 20000)
    th = np.linspace(0, 2 * np.pi, 3000, endpoint=False)
    circle = np.column_stack([np.cos(th), np.sin(th)])
    hd = max(
        float(np.max(np.abs(np.linalg.norm(est.points, axis=1) - 1))),
        float(distance_to_set(circle, est.points).max()),
    )
    assert hd <= 1e-3


def test_omega_limit_unbounded_tail():
    with pytest.raises(UnboundedTail):
        omega_limit(M.repeller(), [1.0], 1.0, 2.0, 1e-3)


def test_lyapunov_double_well():
    tr = evolve(M.double_well_flow(), [0.3], 5.0, sample_dt=0.05)
    rep = lyapunov_monotonicity(M.double_well_flow(), M.double_well, tr)
    assert rep.passed
    still = evolve(M.double_well_flow(), [1.0], 3.0, sample_dt=0.5)
    assert lyapunov_monotonicity(M.double_well_flow(), M.double_well, still).max_increase == 0.0


def test_attraction_examples():
    rep = attraction_probe(M.decay(), np.array([[0.0]]), [[1.0], [-1.0]], 20.0, 1e-3)
    assert rep.fraction == 1.0
    for e in rep.entries:
        assert abs(e.entry_time - np.log(1e3)) <= 0.05
    circle = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 2000)), np.sin(np.linspace(0, 2 * np.pi, 2000))])
    rep = attraction_probe(M.hopf(), circle, [[0.1, 0.0], [2.0, 0.0]], 20.0, 1e-2)
    assert rep.fraction == 1.0
    rep = attraction_probe(M.saddle(), np.zeros((1, 2)), [[1.0, 0.0]], 5.0, 1e-2)
    assert rep.fraction == 0.0


def test_batch_matches_single():
    xs = np.array([[0.2, 0.1], [1.5, -0.3], [-0.7, 0.7]])
    b = evolve_batch(M.hopf(), xs, 1.3)
    for i, x in enumerate(xs):
        single = evolve(M.hopf(), x, 1.3).final
        np.testing.assert_allclose(b.states[-1, i], single, atol=1e-9)


def test_batch_blowup_is_frozen():
    b = evolve_batch(M.quadratic_blowup(), np.array([[1.0], [0.1]]), 2.0)
    assert abs(b.exploded_at[0] - (1 - 1e-6)) <= 1e-6
    assert np.isnan(b.exploded_at[1])


def test_bad_method_rejected():
    with pytest.raises(ValueError):
        FlowModel(1, lambda x, t: x, method="rk99")
    with pytest.raises(ValueError):
        FlowModel(1, lambda x, t: x, method="etdrk4")


def test_regions_compose():
    r = ball([0, 0], 1.0) & interval(-0.5, 2)
    assert r([0.0, 0.0]) < 0 and r([-0.8, 0.0]) > 0
    assert whole_space()([1e9]) < 0
