"""Ważewski pairs, exit-set verification, the collapsed quotient flow and
stability-at-infinity probes.

A pair ``(N, E)`` is given by two :class:`~semiflow.regions.Region`
objects.  A state is treated as lying in ``E`` when its E-margin is at
most ``tol_E`` (default ``100 * abs_tol``) since margins are only
approximately zero at discrete instants.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError
from .flow import COMPLETED, ESCAPED, EXPLODED, FlowModel, StateVector, Trajectory, evolve
from .io import fmt, report_text, write_csv, write_trajectory
from .regions import Region

log = logging.getLogger(__name__)

INTERIOR = "interior"
COLLAPSED = "collapsed"


@dataclass(frozen=True)
class WazewskiPairSpec:
    N: Region
    E: Region
    description: str = ""

    def in_N(self, x, tol: float = 0.0) -> bool:
        return self.N(x) <= tol

    def in_E(self, x, tol: float) -> bool:
        return self.E(x) <= tol


def _tol_E(model: FlowModel, tol):
    return 100 * model.abs_tol if tol is None else tol


def margin_jumps(region: Region, traj: Trajectory, norm=None) -> tuple[float, float]:
    """Largest margin jump between consecutive samples and the Lipschitz
    ratio ``|dm| / |dx|`` it implies.  Both are logged."""
    norm = norm or (lambda v: np.linalg.norm(v, axis=-1))
    m = region.margins(traj.states)
    if len(m) < 2:
        return 0.0, 0.0
    dm = np.abs(np.diff(m))
    dx = norm(np.diff(traj.states, axis=0))
    ratio = np.where(dx > 0, dm / np.where(dx > 0, dx, 1.0), 0.0)
    jump, lip = float(dm.max()), float(ratio.max())
    log.info("region %s: max margin jump %.3g, Lipschitz estimate %.3g", region.label, jump, lip)
    return jump, lip


# ---------------------------------------------------------------- exit sets


@dataclass
class Violation:
    index: int
    kind: str  # "E not N-invariant" | "exit outside E"
    time: float
    state: np.ndarray
    e_margin: float
    trajectory: Trajectory = field(repr=False)


@dataclass
class ExitSetReport:
    checked: int
    exits: int
    violations: list[Violation]
    errors: list[tuple[int, str]]
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violations and not self.errors

    def summary(self) -> dict:
        out = {
            "check": "exit_set",
            "samples": self.checked,
            "exits": self.exits,
            "violations": len(self.violations),
            "precondition_errors": len(self.errors),
            "tol": self.tol,
            "passed": self.passed,
        }
        for k, v in enumerate(self.violations):
            out[f"violation_{k}"] = (
                f"sample={v.index} kind={v.kind} t={fmt(v.time)} e_margin={fmt(v.e_margin)}"
            )
        for i, msg in self.errors:
            out[f"error_{i}"] = msg
        return out

    def write(self, out_dir, stem: str = "exit_set") -> None:
        from pathlib import Path

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}_report.txt").write_text(report_text(self.summary()))
        for k, v in enumerate(self.violations):
            write_trajectory(out_dir / f"{stem}_violation_{k}.csv", v.trajectory.times, v.trajectory.states)


def exit_set_check(
    model: FlowModel,
    pair: WazewskiPairSpec,
    samples: Sequence,
    horizon: float,
    tol: float | None = None,
) -> ExitSetReport:
    """Check that ``E`` is an exit set for ``N`` on sampled initial states.

    For a sample in ``N ∩ E`` every recorded state before leaving ``N``
    must stay within ``tol`` of ``E``.  For any sample whose trajectory
    leaves ``N`` before blowing up, the (bisected) exit state must lie
    within ``tol`` of ``E``.
    """
    tol = _tol_E(model, tol)
    violations: list[Violation] = []
    errors: list[tuple[int, str]] = []
    exits = 0
    for i, x in enumerate(samples):
        y = model.coerce(x)
        if pair.N(y) > 0:
            errors.append((i, f"sample {i} outside N (margin {pair.N(y):.3g})"))
            continue
        traj = evolve(model, y, horizon, region=pair.N)
        em = pair.E.margins(traj.states)
        if em[0] <= tol:
            inside = traj.states if traj.status.kind != ESCAPED else traj.states[:-1]
            k = int(np.argmax(em[: len(inside)]))
            if em[k] > tol:
                violations.append(
                    Violation(i, "E not N-invariant", float(traj.times[k]), traj.states[k], float(em[k]), traj)
                )
                continue
        if traj.status.kind == ESCAPED:
            exits += 1
            if em[-1] > tol:
                violations.append(
                    Violation(i, "exit outside E", float(traj.times[-1]), traj.final, float(em[-1]), traj)
                )
    return ExitSetReport(len(samples) - len(errors), exits, violations, errors, tol)


# ----------------------------------------------------------- quotient flow


@dataclass(frozen=True)
class QuotientState:
    """Point of ``N/E``: either an interior state or the collapsed class ``[E]``.

    ``elapsed`` is the flow time already spent to reach an interior state,
    so that collapse times stay absolute under composition.
    """

    tag: str
    state: StateVector | None = None
    collapse_time: float | None = None
    elapsed: float = 0.0

    @property
    def collapsed(self) -> bool:
        return self.tag == COLLAPSED

    def __str__(self):
        if self.collapsed:
            return f"Collapsed(t={self.collapse_time:.12g})"
        return f"Interior({np.array2string(self.state.coords, precision=12)})"


def _outside_N_minus_E(pair: WazewskiPairSpec, tol_E: float) -> Region:
    N, E = pair.N, pair.E
    return Region(lambda x: max(N.margin(x), tol_E - E.margin(x)), f"{N.label}\\{E.label}")


def quotient_evolve(
    model: FlowModel,
    pair: WazewskiPairSpec,
    x,
    t: float,
    tol: float | None = None,
) -> QuotientState:
    """``G~(t)[x]``: interior while the trajectory stays in ``N \\ E``,
    collapsed from the escape (or blow-up) time on."""
    if isinstance(x, QuotientState):
        return quotient_compose(model, pair, x, t, tol)
    tol = _tol_E(model, tol)
    if t < 0:
        raise PreconditionError("t must be >= 0")
    y = model.coerce(x)
    if pair.E(y) <= tol:
        return QuotientState(COLLAPSED, None, 0.0)
    if pair.N(y) > 0:
        raise PreconditionError(f"x outside N (margin {pair.N(y):.3g})")
    traj = evolve(model, y, t, region=_outside_N_minus_E(pair, tol))
    if traj.status.kind == COMPLETED:
        return QuotientState(INTERIOR, model.state(traj.final), None, float(t))
    return QuotientState(COLLAPSED, None, float(traj.status.time))


def quotient_compose(
    model: FlowModel, pair: WazewskiPairSpec, q: QuotientState, t: float, tol: float | None = None
) -> QuotientState:
    """Advance a quotient state by ``t``; ``[E]`` is absorbing."""
    if q.collapsed:
        return q
    nxt = quotient_evolve(model, pair, q.state, t, tol)
    if nxt.collapsed:
        return QuotientState(COLLAPSED, None, q.elapsed + nxt.collapse_time)
    return QuotientState(INTERIOR, nxt.state, None, q.elapsed + nxt.elapsed)


# ------------------------------------------------- stability at infinity


def sphere_sampler(region: Region | None = None, spread: float = 1.0, max_tries: int = 50):
    """Default start sampler: random directions, radii from just above
    ``R`` up to ``(1 + spread) R`` on a geometric grid.  Starts outside
    ``region`` are redrawn."""

    def sample(model: FlowModel, R: float, n: int, rng: np.random.Generator):
        radii = R * np.geomspace(1 + 1e-6, 1 + spread, n)
        out = []
        for r in radii:
            for _ in range(max_tries):
                d = rng.standard_normal(model.dim)
                d /= model.norm(d)
                x = r * d
                if region is None or region(x) <= 0:
                    out.append(x)
                    break
        return out

    return sample


@dataclass
class StabilityTable:
    rows: list[tuple[float, float | None, int, int]]
    counterexamples: dict[float, Trajectory]
    starts: int

    @property
    def radii(self) -> dict[float, float | None]:
        return {r: R for r, R, _, _ in self.rows}

    def monotone(self) -> bool:
        vals = [np.inf if R is None else R for _, R, _, _ in self.rows]
        return all(a <= b for a, b in zip(vals, vals[1:]))

    def csv_rows(self):
        return [(r, "none" if R is None else R, n, v) for r, R, n, v in self.rows]

    def write(self, out_dir, stem: str = "stability") -> None:
        from pathlib import Path

        out_dir = Path(out_dir)
        write_csv(out_dir / f"{stem}.csv", ["r", "R", "samples", "violations"], self.csv_rows())
        for k, (r, traj) in enumerate(sorted(self.counterexamples.items())):
            write_trajectory(out_dir / f"{stem}_counterexample_{k}.csv", traj.times, traj.states)


def stability_at_infinity_probe(
    model: FlowModel,
    region: Region,
    inner_radii: Sequence[float],
    start_radii: Sequence[float],
    samples_per_radius: int,
    horizon: float,
    *,
    sampler: Callable | None = None,
    seed: int = 0,
) -> StabilityTable:
    """Estimate, for each inner radius ``r``, the smallest tested start
    radius ``R`` with: every sampled start in ``region`` of norm ``> R``
    keeps norm ``> r`` until it leaves ``region`` or the horizon ends.

    Rows read ``(r, R, samples, violations)``: ``samples`` counts starts of
    norm above ``R`` and ``violations`` how many of them entered the ball of
    radius ``r``.  When no tested ``R`` works, ``R`` is ``None``, the counts
    refer to the largest ``R`` and a counterexample trajectory is kept.
    """
    inner = [float(r) for r in inner_radii]
    outer = [float(R) for R in start_radii]
    if any(r <= 0 for r in inner + outer):
        raise PreconditionError("radii must be positive")
    if inner != sorted(inner) or outer != sorted(outer):
        raise PreconditionError("radii must be increasing")
    rng = np.random.default_rng(seed)
    sampler = sampler or sphere_sampler(region)

    norms0, min_norms, trajs = [], [], []
    for R in outer:
        for x in sampler(model, R, samples_per_radius, rng):
            y = model.coerce(x)
            if region(y) > 0:
                continue
            traj = evolve(model, y, horizon, region=region)
            states = traj.states[:-1] if traj.status.kind == ESCAPED else traj.states
            norms0.append(float(model.norm(y)))
            min_norms.append(float(np.min(model.norm(states))))
            trajs.append(traj)
    if not trajs:
        raise PreconditionError("sampler produced no starts inside the region")
    norms0 = np.array(norms0)
    min_norms = np.array(min_norms)

    rows, counter = [], {}
    for r in inner:
        found = None
        for R in outer:
            sel = norms0 > R
            bad = sel & (min_norms <= r)
            if not bad.any():
                found = R
                rows.append((r, R, int(sel.sum()), 0))
                break
        if found is None:
            sel = norms0 > outer[-1]
            bad = np.nonzero(sel & (min_norms <= r))[0]
            rows.append((r, None, int(sel.sum()), int(bad.size)))
            counter[r] = trajs[int(bad[np.argmax(norms0[bad])])]
    return StabilityTable(rows, counter, len(trajs))


# ---------------------------------------------------------- non-explosion


@dataclass
class NonexplosionReport:
    checked: int
    exploded: list[tuple[int, float]]
    escaped: int
    circumradius: float

    @property
    def passed(self) -> bool:
        return not self.exploded

    def summary(self) -> dict:
        return {
            "check": "nonexplosion",
            "samples": self.checked,
            "escaped": self.escaped,
            "exploded_inside": len(self.exploded),
            "circumradius_estimate": self.circumradius,
            "passed": self.passed,
        }


def nonexplosion_probe(
    model: FlowModel,
    bounded_region: Region,
    samples: Sequence,
    horizon: float,
    *,
    n_directions: int = 64,
    seed: int = 0,
) -> NonexplosionReport:
    """No sampled trajectory may blow up while it remains in the region.

    Boundedness of the region is checked by sampling: points at the
    blow-up norm along random directions (and along the sample
    directions) must lie outside it.
    """
    rng = np.random.default_rng(seed)
    dirs = [rng.standard_normal(model.dim) for _ in range(n_directions)]
    dirs += [model.coerce(x) for x in samples]
    for d in dirs:
        nd = float(model.norm(d))
        if nd == 0:
            continue
        for s in (1.0, -1.0):
            if bounded_region(s * model.blow_up_norm * d / nd) <= 0:
                raise PreconditionError("region appears unbounded at the blow-up norm")
    exploded, escaped, rad, checked = [], 0, 0.0, 0
    for i, x in enumerate(samples):
        y = model.coerce(x)
        if bounded_region(y) > 0:
            raise PreconditionError(f"sample {i} outside the region")
        traj = evolve(model, y, horizon, region=bounded_region)
        checked += 1
        inside = traj.states[:-1] if traj.status.kind == ESCAPED else traj.states
        rad = max(rad, float(np.max(model.norm(inside))))
        if traj.status.kind == EXPLODED:
            exploded.append((i, float(traj.status.time)))
        elif traj.status.kind == ESCAPED:
            escaped += 1
    return NonexplosionReport(checked, exploded, escaped, rad)
