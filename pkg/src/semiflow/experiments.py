"""Experiment drivers behind the command line.

Each driver takes the parsed parameters, an output directory and a seed,
writes its CSV artifacts and records named checks on a :class:`RunReport`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import elliptic as E
from . import models as M
from . import resonant as RS
from .flow import check_semigroup, distance_to_set, escape_time, evolve, omega_limit
from .io import fmt, report_text, write_csv, write_trajectory
from .linking import MINIMAX_HEADER, DiscretePath, invariant_candidates, linking_check_sphere, minimax_estimate
from .regions import Region, ball, box, interval, whole_space
from .wazewski import (
    WazewskiPairSpec,
    exit_set_check,
    quotient_compose,
    quotient_evolve,
    stability_at_infinity_probe,
)


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class RunReport:
    experiment: str
    seed: int
    config: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    values: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def check(self, name: str, passed: bool, detail: dict | None = None, **more) -> bool:
        detail = {k: v for k, v in {**(detail or {}), **more}.items() if k not in ("passed", "check")}
        if any(c.name == name for c in self.checks):
            raise ValueError(f"check {name!r} recorded twice")
        self.checks.append(Check(name, bool(passed), detail))
        return bool(passed)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def pass_vector(self) -> list[tuple[str, bool]]:
        return [(c.name, c.passed) for c in self.checks]

    def lines(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed}
        for k, v in self.config.items():
            out[f"config.{k}"] = v
        for k, v in self.values.items():
            out[f"value.{k}"] = v
        for c in self.checks:
            out[f"check.{c.name}"] = "pass" if c.passed else "fail"
            for k, v in c.detail.items():
                out[f"check.{c.name}.{k}"] = v
        out["artifacts"] = " ".join(self.artifacts)
        out["overall"] = "pass" if self.passed else "fail"
        out["wall_clock_s"] = f"{self.wall_clock:.3f}"
        return out

    def text(self) -> str:
        return report_text(self.lines())


def _artifact(report: RunReport, path: Path) -> Path:
    report.artifacts.append(path.name)
    return path


def emit_plotdata(out_dir, kind: str, source, name: str | None = None) -> Path:
    """Write ``source`` with the CSV schema of ``kind``."""
    out_dir = Path(out_dir)
    if kind == "trajectory":
        times, states = source
        return write_trajectory(out_dir / (name or "trajectory.csv"), times, states)
    if kind == "minimax":
        return write_csv(out_dir / (name or "minimax.csv"), MINIMAX_HEADER, [r.row() for r in source])
    if kind == "recurrence":
        return write_csv(out_dir / (name or "recurrence.csv"), ["l", "eps", "worst_gap", "pass"], source)
    if kind == "profile":
        r, u = source
        return write_csv(out_dir / (name or "profile.csv"), ["r", "u"], zip(r, u))
    if kind == "stability":
        return write_csv(out_dir / (name or "stability.csv"), ["r", "R", "samples", "violations"], source)
    raise ValueError(f"unknown plot-data kind {kind!r}")


# ------------------------------------------------------------------ verify


def hopf_circle_distance(points, n_circle: int = 4000) -> float:
    """Hausdorff distance between ``points`` and the unit circle."""
    radial = float(np.max(np.abs(np.linalg.norm(points, axis=1) - 1)))
    th = np.linspace(0, 2 * np.pi, n_circle, endpoint=False)
    circle = np.column_stack([np.cos(th), np.sin(th)])
    cover = float(distance_to_set(circle, points).max())
    return max(radial, cover)


def semigroup_sweep(triples: int, seed: int):
    rng = np.random.default_rng(seed)
    zoo = M.builtin_models()
    names = sorted(zoo)
    worst, applicable, failures = 0.0, 0, []
    for i in range(triples):
        name = names[rng.integers(len(names))]
        model = zoo[name]
        x = rng.uniform(-1.5, 1.5, model.dim)
        s, t = rng.uniform(0, 2, 2)
        chk = check_semigroup(model, x, float(s), float(t))
        if not chk.applicable:
            continue
        applicable += 1
        worst = max(worst, chk.deviation)
        if not chk.passed:
            failures.append((name, x, s, t, chk.deviation))
    return worst, applicable, failures


def bebutov_axioms(n_triples: int, seed: int, n_max: int = 5):
    rng = np.random.default_rng(seed)
    t = np.linspace(-n_max, n_max, 201)

    def record():
        k = rng.integers(1, 4)
        a = rng.normal(size=(k, 2))
        w = rng.uniform(0.2, 3, k)
        ph = rng.uniform(0, 2 * np.pi, k)
        states = np.stack([np.sum(a[:, j, None] * np.sin(w[:, None] * t + ph[:, None]), axis=0) for j in range(2)], axis=1)
        return t, states

    sym, tri = 0.0, 0.0
    for _ in range(n_triples):
        u, v, w = record(), record(), record()
        duv = RS.bebutov_distance(u, v, n_max)[0]
        dvu = RS.bebutov_distance(v, u, n_max)[0]
        duw = RS.bebutov_distance(u, w, n_max)[0]
        dwv = RS.bebutov_distance(w, v, n_max)[0]
        sym = max(sym, abs(duv - dvu))
        tri = max(tri, duv - (duw + dwv))
    closed = 0.0
    for delta in rng.uniform(0, 5, 50):
        base = np.zeros((len(t), 3))
        shifted = base + delta / np.sqrt(3)
        got = RS.bebutov_distance((t, base), (t, shifted), n_max)[0]
        want = (1 - 2.0**-n_max) * delta / (1 + delta)
        closed = max(closed, abs(got - want))
    return sym, tri, closed


def quotient_examples():
    """The three standard quotient-flow cases; returns named results."""
    us = M.unit_speed()
    pair = WazewskiPairSpec(interval(0, 1), Region(lambda x: abs(x[0] - 1), "{1}"), "unit speed")
    sq = M.quadratic_blowup()
    pair_sq = WazewskiPairSpec(Region(lambda x: x[0] - 1e6, "u<=1e6"), Region(lambda x: x[0], "u<=0"), "u'=u^2")
    out = {
        "interior": quotient_evolve(us, pair, [0.0], 0.5),
        "collapsed": quotient_evolve(us, pair, [0.0], 1.5),
        "blowup": quotient_evolve(sq, pair_sq, [1.0], 2.0),
    }
    # semigroup on interior branches and absorption of the collapsed state
    devs, absorbing = [], True
    for model, pr, x in ((us, pair, [0.0]), (M.decay(), WazewskiPairSpec(interval(-2, 2), Region(lambda y: abs(abs(y[0]) - 2), "ends")), [1.0]), (sq, pair_sq, [1.0])):
        for s, t in ((0.1, 0.3), (0.2, 0.5), (0.4, 0.55), (0.7, 0.9), (1.2, 0.4)):
            whole = quotient_evolve(model, pr, x, s + t)
            parts = quotient_compose(model, pr, quotient_evolve(model, pr, x, s), t)
            if whole.collapsed != parts.collapsed:
                absorbing = False
                continue
            if whole.collapsed:
                absorbing &= abs(whole.collapse_time - parts.collapse_time) <= 10 * model.abs_tol
                later = quotient_compose(model, pr, parts, 3.0)
                absorbing &= later is parts
            else:
                devs.append(float(model.norm(whole.state.coords - parts.state.coords)))
    out["interior_dev"] = max(devs) if devs else 0.0
    out["absorbing"] = absorbing
    return out


def saddle_exit_check():
    sad = M.saddle()
    N = box([-1, -1], [1, 1], "square")
    faces = Region(lambda x: max(abs(abs(x[0]) - 1), abs(x[1]) - 1), "|x|=1 faces")
    g = np.linspace(-1, 1, 10)
    samples = [[a, b] for a in g for b in g]
    good = exit_set_check(sad, WazewskiPairSpec(N, faces), samples, 20.0)
    us = M.unit_speed()
    wrong = exit_set_check(us, WazewskiPairSpec(interval(0, 1), Region(lambda x: abs(x[0]), "{0}")), [[0.5]], 5.0)
    return good, wrong


def run_verify(p: dict, out: Path, seed: int, rep: RunReport):
    worst, n_app, fails = semigroup_sweep(p["verify.triples"], seed)
    rep.check("semigroup", not fails and n_app > 0, max_deviation=worst, applicable=n_app, tol=1e-9)
    hopf = M.hopf()
    window = 2 * np.pi + 0.1
    est = omega_limit(hopf, [0.5, 0.0], 30.0, window, p["verify.omega_cluster_tol"], sample_dt=window / 20000)
    hd = hopf_circle_distance(est.points)
    rep.check("hopf_omega_limit", hd <= 1e-3, hausdorff=hd, representatives=len(est.points))
    emit_plotdata(out, "trajectory", (np.arange(len(est.points), dtype=float), est.points), "hopf_omega.csv")
    _artifact(rep, out / "hopf_omega.csv")

    m = RS.SpectralModel(16, 4.0)
    rng = np.random.default_rng(seed + 1)
    U = rng.normal(size=(50, 16))
    P = {s: RS.project(m, U, s) for s in ("minus", "zero", "plus")}
    ok = np.array_equal(P["minus"] + P["zero"] + P["plus"], U)
    for a in P:
        ok &= np.array_equal(RS.project(m, P[a], a), P[a])
        for b in P:
            if a != b:
                ok &= not np.any(RS.project(m, P[a], b))
    rep.check("projection_algebra", bool(ok))
    G = m.basis @ m.basis.T * m.weight
    qerr = float(np.max(np.abs(G - np.pi / 2 * np.eye(16))))
    rep.check("quadrature_exactness", qerr <= 1e-10, max_error=qerr)

    sym, tri, closed = bebutov_axioms(p["verify.metric_triples"], seed + 2)
    rep.check("bebutov_metric", sym == 0.0 and tri <= 1e-12 and closed <= 1e-12, symmetry=sym, triangle_excess=tri, closed_form_error=closed)

    q = quotient_examples()
    rep.check(
        "quotient_flow",
        (not q["interior"].collapsed and abs(q["interior"].state.coords[0] - 0.5) <= 1e-9)
        and q["collapsed"].collapsed and abs(q["collapsed"].collapse_time - 1) <= 1e-6
        and q["blowup"].collapsed and abs(q["blowup"].collapse_time - 1) <= 1e-4
        and q["interior_dev"] <= 1e-9 and q["absorbing"],
        interior_deviation=q["interior_dev"], blowup_collapse_time=q["blowup"].collapse_time,
    )
    good, wrong = saddle_exit_check()
    rep.check("exit_set", good.passed and not wrong.passed and len(wrong.violations) == 1,
              saddle_violations=len(good.violations), wrong_witness_margin=wrong.violations[0].e_margin if wrong.violations else float("nan"))


# ----------------------------------------------------------- mountain pass


def mountain_pass_setup(problem: str, path_nodes: int, max_gap: float):
    if problem == "double-well":
        model, phi = M.double_well_flow(), M.double_well
        path = DiscretePath.through([[-1.0], [1.5], [1.0]], max(2, path_nodes // 2), max_gap)
        saddle, value = np.array([0.0]), 1.0
    else:
        a = 1 / np.sqrt(2)
        model, phi = M.quartic2d_flow(), M.quartic2d
        path = DiscretePath.through([[-a, 0.0], [0.0, 0.8], [a, 0.0]], max(2, path_nodes // 2), max_gap)
        saddle, value = np.array([0.0, 0.0]), 0.0
    return model, phi, path, saddle, value


def run_mountain_pass(p: dict, out: Path, seed: int, rep: RunReport):
    model, phi, path, saddle, value = mountain_pass_setup(p["mp.problem"], p["mp.path_nodes"], p["mp.max_gap"])
    t0 = time.perf_counter()
    c, records, final = minimax_estimate(model, phi, path, p["mp.max_iters"], p["mp.dt"], p["mp.stall_tol"])
    elapsed = time.perf_counter() - t0
    cands = invariant_candidates(model, phi, final, c, p["mp.band"], p["mp.residual_tol"])
    rep.values.update({"c": c, "iterations": len(records) - 1, "candidates": len(cands)})
    emit_plotdata(out, "minimax", records)
    _artifact(rep, out / "minimax.csv")
    emit_plotdata(out, "trajectory", (np.arange(len(final.nodes), dtype=float), final.nodes), "final_path.csv")
    _artifact(rep, out / "final_path.csv")
    rep.check("minimax_value", abs(c - value) <= 1e-3 and len(records) - 1 <= 500, c=c, analytic=value, seconds=elapsed)
    dist = min((float(np.linalg.norm(x - saddle)) for x, _ in cands), default=float("inf"))
    rep.check("invariant_candidate", dist <= 1e-2, distance_to_saddle=dist)
    pinned = np.array_equal(final.nodes[final.pinned][[0, -1]], path.nodes[[0, -1]])
    rep.check("pinned_endpoints", bool(pinned))
    incs = np.diff([r.c_estimate for r in records])
    budget = final.max_gap * 10  # refinement slack; phi is Lipschitz with constant < 10 on these paths
    rep.check("monotone_minimax", bool(np.all(incs <= budget)), max_increase=float(incs.max(initial=0.0)))
    if len(saddle) > 1:
        ok, idx = linking_check_sphere(path, path.nodes[0], 0.5 * float(np.linalg.norm(path.nodes[-1] - path.nodes[0])))
        rep.check("sphere_linking", ok, crossings=len(idx))


# ---------------------------------------------------------------- resonant


def resonant_model(p: dict) -> RS.SpectralModel:
    g = RS.ForcingSignal(p["resonant.g.frequencies"], p["resonant.g.amplitudes"])
    return RS.SpectralModel(p["resonant.modes"], p["resonant.mu"], p["resonant.f"], g)


def run_resonant(p: dict, out: Path, seed: int, rep: RunReport):
    model = resonant_model(p)
    m1, m2 = RS.landesman_lazer_margins(model)
    rep.check("landesman_lazer", m1 > 0 and m2 > 0, m1=m1, m2=m2)
    kappa, c0, _ = RS.kappa_bound_check(model, np.linspace(-1e3, 1e3, 4001))
    rep.values.update({"kappa": kappa, "c0": c0})
    th = RS.invariance_thresholds(model, seed=seed)
    for k, v in th.summary().items():
        rep.values[f"threshold.{k}"] = v
    c, rho = p["resonant.c"], p["resonant.rho"]
    samples = RS.sample_region(model, c, rho, p["resonant.seeds"], seed=seed)
    t0 = time.perf_counter()
    inv = RS.invariant_region_check(model, None, c, rho, samples, p["resonant.horizon"], p["resonant.tol"], dt=p["resonant.dt"], thresholds=th)
    rep.check("invariant_region", inv.passed, inv.summary(), seconds=time.perf_counter() - t0)
    if inv.witness is not None:
        emit_plotdata(out, "trajectory", (inv.witness.times, inv.witness.states), "invariance_witness.csv")
        _artifact(rep, out / "invariance_witness.csv")

    seeds = samples[: p["resonant.search_seeds"]]
    bs = RS.bounded_solution_search(
        model, None, seeds, p["resonant.transient"], p["resonant.record_horizon"], c=c, n_max=p["resonant.n_max"],
        reference_l=max(p["resonant.l_grid"]),
    )
    for k, v in bs.summary().items():
        rep.values[f"record.{k}"] = v
    rec = bs.record
    stride = max(1, int(round(1.0 / (rec.times[1] - rec.times[0]))))
    emit_plotdata(out, "trajectory", (rec.times[::stride], rec.states[::stride]), "record.csv")
    _artifact(rep, out / "record.csv")
    bounded = np.isfinite(bs.sup_norm) and -c <= bs.J_range[0] and bs.J_range[1] <= c
    rep.check("bounded_record", bounded and bs.defect <= 1e-3, sup_norm=bs.sup_norm, J_min=bs.J_range[0], J_max=bs.J_range[1], forward_defect=bs.defect)
    rt = RS.recurrence_test(rec, p["resonant.eps"], p["resonant.l_grid"], p["resonant.n_max"], model.norm_V)
    emit_plotdata(out, "recurrence", rt.rows)
    _artifact(rep, out / "recurrence.csv")
    rep.check("recurrence", rt.passed, smallest_l=rt.smallest_l, truncation=rt.truncation)


# ---------------------------------------------------------------- elliptic


def elliptic_model(p: dict) -> E.EllipticModel:
    return E.EllipticModel(
        n=p["elliptic.n"], R_max=p["elliptic.R_max"], grid_points=p["elliptic.grid_points"],
        a_of_r=E.constant(p["elliptic.a"]), gamma=p["elliptic.gamma"],
        b_of_r=E.gaussian_weight(p["elliptic.b.amplitude"], p["elliptic.b.width"]),
    )


def elliptic_transient(model: E.EllipticModel) -> np.ndarray:
    return 3.0 * np.exp(-model.r**2)


def run_elliptic(p: dict, out: Path, seed: int, rep: RunReport):
    model = elliptic_model(p)
    cond = E.validate_conditions(model)
    rep.check("conditions", cond.passed, cond.summary())
    t0 = time.perf_counter()
    sol = E.positive_solution_search(model, path_nodes=p["elliptic.path_nodes"], trial_count=p["elliptic.trial_count"], seed=seed)
    elapsed = time.perf_counter() - t0
    for k, v in sol.summary().items():
        rep.values[f"solution.{k}"] = v
    emit_plotdata(out, "profile", (model.r, sol.u_star))
    _artifact(rep, out / "profile.csv")
    emit_plotdata(out, "minimax", sol.records)
    _artifact(rep, out / "minimax.csv")
    rep.check("positive_solution", sol.passed, residual=sol.residual, J=sol.J_value, beta=sol.beta, c=sol.c, seconds=elapsed)
    rep.check("cone_clip", sol.diagnostics["cone_clip_ok"], max_clip=sol.diagnostics["max_cone_clip"])

    u0 = elliptic_transient(model)
    e1, e2, order = E.energy_identity_convergence(model, u0, 0.5, p["elliptic.energy_dt"])
    rep.check("energy_identity", e1.passed and e2.rel_error < e1.rel_error and order >= 1, rel_error=e1.rel_error, rel_error_half=e2.rel_error, order=order)

    c = p["elliptic.band_c"]
    trajs = [E.parabolic_evolve(model, u0, 2.0, dt=1e-3)]
    rng = np.random.default_rng(seed)
    seeds = [np.abs(rng.normal(size=3)) @ np.exp(-((model.r[None, :] - rng.uniform(0, 4, (3, 1))) / rng.uniform(0.3, 2, (3, 1))) ** 2) for _ in range(100)]
    cone = E.cone_invariance_check(model, seeds, 1.0)
    rep.check("cone_invariance", cone.passed, min_entry=cone.min_entry)

    band = E.EnergyBand(-c, c)
    w1 = E.first_eigenfunction(model)
    table = stability_at_infinity_probe(
        model.flow(), band.region(model), [1.0, 2.0, 4.0], [2.0, 4.0, 8.0, 16.0],
        p["elliptic.stability_samples"], 5.0, sampler=E.band_sampler(model, band, w1), seed=seed,
    )
    emit_plotdata(out, "stability", table.csv_rows())
    _artifact(rep, out / "stability.csv")
    rep.check("stability_table", table.monotone() and len(table.rows) > 0 and any(R is not None for _, R, _, _ in table.rows), rows=len(table.rows))
    sampler = E.band_sampler(model, band, w1)
    for x in sampler(model.flow(), 4.0, 3, np.random.default_rng(seed + 1)):
        trajs.append(E.parabolic_evolve(model, x, 5.0, region=band.region(model)))
    worst = min(E.dissipativity_check(model, tr, c).worst_margin for tr in trajs)
    rep.check("dissipativity", worst >= -1e-6, worst_margin=worst, trajectories=len(trajs))
    mono = max(float(np.max(np.diff(E.J7_eval(model, tr.states)), initial=0.0)) for tr in trajs)
    rep.check("energy_monotone", mono <= 10 * model.abs_tol, max_increase=mono)


# ----------------------------------------------------- quotient / probes


def run_quotient(p: dict, out: Path, seed: int, rep: RunReport):
    q = quotient_examples()
    rep.values.update({k: str(v) for k, v in q.items() if k in ("interior", "collapsed", "blowup")})
    rep.check("interior_example", not q["interior"].collapsed and abs(q["interior"].state.coords[0] - 0.5) <= 1e-9)
    rep.check("collapse_example", q["collapsed"].collapsed and abs(q["collapsed"].collapse_time - 1) <= 1e-6, collapse_time=q["collapsed"].collapse_time)
    rep.check("blowup_collapse", q["blowup"].collapsed and abs(q["blowup"].collapse_time - 1) <= 1e-4, collapse_time=q["blowup"].collapse_time)
    rep.check("quotient_semigroup", q["interior_dev"] <= 1e-9, max_deviation=q["interior_dev"])
    rep.check("collapsed_absorbing", q["absorbing"])
    good, wrong = saddle_exit_check()
    rep.check("saddle_exit_set", good.passed, violations=len(good.violations), exits=good.exits)
    rep.check("wrong_exit_set_detected", not wrong.passed, witness_margin=wrong.violations[0].e_margin if wrong.violations else float("nan"))
    traj = evolve(M.unit_speed(), [0.0], p["quotient.horizon"], region=interval(0, 1))
    emit_plotdata(out, "trajectory", (traj.times, traj.states), "unit_speed_exit.csv")
    _artifact(rep, out / "unit_speed_exit.csv")


def run_stability(p: dict, out: Path, seed: int, rep: RunReport):
    kind = p["stability.model"]
    if kind == "elliptic":
        model = E.EllipticModel()
        band = E.EnergyBand(-p["stability.band_c"], p["stability.band_c"])
        fm, region, sampler = model.flow(), band.region(model), E.band_sampler(model, band)
    else:
        fm = M.repeller() if kind == "repeller" else M.decay()
        region, sampler = whole_space(), None
    table = stability_at_infinity_probe(
        fm, region, p["stability.inner_radii"], p["stability.start_radii"], p["stability.samples"],
        p["stability.horizon"], sampler=sampler, seed=seed,
    )
    table.write(out)
    _artifact(rep, out / "stability.csv")
    for k in range(len(table.counterexamples)):
        _artifact(rep, out / f"stability_counterexample_{k}.csv")
    rep.values["radii_found"] = sum(R is not None for _, R, _, _ in table.rows)
    rep.check("table_monotone", table.monotone() and len(table.rows) > 0, rows=len(table.rows))


DRIVERS = {
    "verify": run_verify,
    "mountain-pass": run_mountain_pass,
    "resonant": run_resonant,
    "elliptic": run_elliptic,
    "quotient-demo": run_quotient,
    "stability-probe": run_stability,
}


def execute(experiment: str, params: dict, out: Path, seed: int, config_echo: dict | None = None) -> RunReport:
    rep = RunReport(experiment, seed, dict(config_echo or {}))
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    DRIVERS[experiment](params, out, seed, rep)
    rep.wall_clock = time.perf_counter() - t0
    return rep


__all__ = ["RunReport", "Check", "execute", "emit_plotdata", "DRIVERS", "fmt"]
