from __future__ import annotations

import numpy as np
import pytest

from semiflow import models as M
from semiflow.errors import PreconditionError
from semiflow.regions import Region, box, interval, whole_space
from semiflow.wazewski import (
    WazewskiPairSpec,
    exit_set_check,
    nonexplosion_probe,
    quotient_compose,
    quotient_evolve,
    stability_at_infinity_probe,
)

RIGHT_END = Region(lambda x: abs(x[0] - 1), "{1}")
LEFT_END = Region(lambda x: abs(x[0]), "{0}")


def unit_pair(E=RIGHT_END):
    return WazewskiPairSpec(interval(0, 1), E)


def test_exit_set_unit_speed():
    assert exit_set_check(M.unit_speed(), unit_pair(), [[0.0], [0.5], [1.0]], 5.0).passed


def test_exit_set_wrong_E_has_witness():
    rep = exit_set_check(M.unit_speed(), unit_pair(LEFT_END), [[0.5]], 5.0)
    assert not rep.passed
    v = rep.violations[0]
    assert v.kind == "exit outside E"
    assert abs(v.state[0] - 1) <= 1e-6 and abs(v.e_margin - 1) <= 1e-6


def test_exit_set_saddle_square():
    faces = Region(lambda x: max(abs(abs(x[0]) - 1), abs(x[1]) - 1))
    g = np.linspace(-1, 1, 10)
    rep = exit_set_check(M.saddle(), WazewskiPairSpec(box([-1, -1], [1, 1]), faces), [[a, b] for a in g for b in g], 20.0)
    assert rep.passed and rep.exits == 100
    assert rep.tol == 100 * M.saddle().abs_tol


def test_exit_set_sample_outside_N_is_error():
    rep = exit_set_check(M.unit_speed(), unit_pair(), [[2.0]], 1.0)
    assert rep.errors and not rep.passed


def test_exit_set_report_written(tmp_path):
    rep = exit_set_check(M.unit_speed(), unit_pair(LEFT_END), [[0.5]], 5.0)
    rep.write(tmp_path)
    assert (tmp_path / "exit_set_report.txt").exists()
    assert (tmp_path / "exit_set_violation_0.csv").read_text().startswith("t,c0\n")


def test_quotient_examples():
    q = quotient_evolve(M.unit_speed(), unit_pair(), [0.0], 0.5)
    assert not q.collapsed and abs(q.state.coords[0] - 0.5) <= 1e-12
    q = quotient_evolve(M.unit_speed(), unit_pair(), [0.0], 1.5)
    assert q.collapsed and abs(q.collapse_time - 1) <= 1e-8
    pair = WazewskiPairSpec(Region(lambda x: x[0] - 1e6), Region(lambda x: x[0]))
    q = quotient_evolve(M.quadratic_blowup(), pair, [1.0], 2.0)
    assert q.collapsed and abs(q.collapse_time - 1) <= 1e-4


def test_quotient_start_in_E_collapses_at_zero():
    q = quotient_evolve(M.unit_speed(), unit_pair(), [1.0], 0.3)
    assert q.collapsed and q.collapse_time == 0.0


def test_quotient_composition_keeps_absolute_time():
    q = quotient_evolve(M.unit_speed(), unit_pair(), [0.0], 0.4)
    q = quotient_compose(M.unit_speed(), unit_pair(), q, 0.3)
    assert not q.collapsed and abs(q.elapsed - 0.7) <= 1e-12
    q = quotient_compose(M.unit_speed(), unit_pair(), q, 1.0)
    assert q.collapsed and abs(q.collapse_time - 1.0) <= 1e-8
    assert quotient_compose(M.unit_speed(), unit_pair(), q, 5.0) is q


def test_quotient_outside_N():
    with pytest.raises(PreconditionError):
        quotient_evolve(M.unit_speed(), unit_pair(), [3.0], 0.1)


def test_stability_repeller_and_decay(tmp_path):
    t = stability_at_infinity_probe(M.repeller(), whole_space(), [0.5, 1.0, 2.0], [0.25, 0.5, 1.0, 2.0, 4.0], 8, 3.0)
    assert t.radii == {0.5: 0.5, 1.0: 1.0, 2.0: 2.0}
    assert t.monotone()
    t = stability_at_infinity_probe(M.decay(), whole_space(), [0.5, 1.0], [1.0, 2.0], 4, 10.0)
    assert all(R is None for R in t.radii.values())
    assert set(t.counterexamples) == {0.5, 1.0}
    t.write(tmp_path)
    assert (tmp_path / "stability.csv").read_text().splitlines()[1] == "0.5,none,4,4"


def test_stability_radii_must_increase():
    with pytest.raises(PreconditionError):
        stability_at_infinity_probe(M.repeller(), whole_space(), [2.0, 1.0], [1.0], 2, 1.0)


def test_nonexplosion_examples():
    assert nonexplosion_probe(M.decay(), interval(-1, 1), [[0.5], [-1.0]], 5.0).passed
    rep = nonexplosion_probe(M.quadratic_blowup(), interval(-2, 2), [[1.0]], 3.0)
    assert rep.passed and rep.escaped == 1


def test_nonexplosion_rejects_unbounded_region():
    with pytest.raises(PreconditionError):
        nonexplosion_probe(M.decay(), whole_space(), [[0.5]], 1.0)
