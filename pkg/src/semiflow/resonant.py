"""Resonant semilinear heat equation on ``(0, pi)`` in a sine Galerkin basis.

The model is ``u_t + (A - mu) u = f(u) + g(x, t)`` with ``A = -d^2/dx^2``
(Dirichlet), eigenpairs ``(k^2, sin kx)`` and ``mu`` equal to one of the
eigenvalues.  A state is the coefficient vector ``u_k``, ``k = 1..m``.

Inner products use the uniform rule ``x_j = j pi / Q`` with weights
``pi / Q``; with ``Q = 4m`` it is exact on products ``sin(jx) sin(kx)``.
Norms follow the coefficient identities

    |u|^2 = (pi/2) sum u_k^2,      ||u||^2 = (pi/2) sum k^2 u_k^2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import minimum_filter1d
from scipy.signal import lfilter

from .errors import ConfigurationRejected, DimensionMismatch, PreconditionError
from .flow import FlowModel, Status, Trajectory, evolve, evolve_batch

log = logging.getLogger(__name__)

HALF_PI = np.pi / 2
DOMAIN_MEASURE = np.pi


# ------------------------------------------------------------ nonlinearity


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar ``f`` with antiderivative ``F(s) = int_0^s f`` and its
    limits ``f_bar = liminf_{s->+inf} f``, ``f_under = -limsup_{s->-inf} f``."""

    name: str
    f: Callable
    F: Callable
    df: Callable
    f_bar: float
    f_under: float
    sup_abs: float

    def __call__(self, s):
        return self.f(s)


def _arctan2_F(s):
    s = np.asarray(s, dtype=float)
    return 2 * s * np.arctan(s) - np.log1p(s * s)


def _logcosh(s):
    s = np.abs(np.asarray(s, dtype=float))
    return s + np.log1p(np.exp(-2 * s)) - np.log(2.0)


NONLINEARITIES = {
    "arctan2": Nonlinearity(
        "arctan2", lambda s: 2 * np.arctan(s), _arctan2_F, lambda s: 2 / (1 + np.square(s)),
        np.pi, np.pi, np.pi,
    ),
    "tanh": Nonlinearity("tanh", np.tanh, _logcosh, lambda s: 1 / np.cosh(s) ** 2, 1.0, 1.0, 1.0),
    "zero": Nonlinearity(
        "zero", np.zeros_like, np.zeros_like, np.zeros_like, 0.0, 0.0, 0.0
    ),
}


def nonlinearity(name: str) -> Nonlinearity:
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise ConfigurationRejected(f"unknown nonlinearity {name!r}", known=sorted(NONLINEARITIES)) from None


# ----------------------------------------------------------------- forcing


@dataclass(frozen=True)
class ForcingSignal:
    """``g(x, t) = profile(x) * sum_i a_i sin(omega_i t)`` with the profile
    given by sine coefficients.  Empty amplitudes mean ``g = 0``."""

    frequencies: tuple = ()
    amplitudes: tuple = ()
    profile: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(w) for w in self.frequencies))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        object.__setattr__(self, "profile", tuple(float(p) for p in self.profile))
        if len(self.frequencies) != len(self.amplitudes):
            raise ConfigurationRejected("frequencies and amplitudes differ in length")

    @property
    def kind(self) -> str:
        return "zero" if not any(self.amplitudes) else "quasiperiodic"

    def temporal(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for w, a in zip(self.frequencies, self.amplitudes):
            out = out + a * np.sin(w * t)
        return out

    def profile_max(self) -> float:
        x = np.linspace(0, np.pi, 4097)
        k = np.arange(1, len(self.profile) + 1)
        return float(np.max(np.abs(np.sin(np.outer(x, k)) @ np.array(self.profile))))

    @property
    def sup_g(self) -> float:
        return self.profile_max() * float(np.sum(np.abs(self.amplitudes)))

    @property
    def inf_g(self) -> float:
        return -self.sup_g

    def coefficients(self, m: int, t):
        """Sine coefficients of ``g(., t)`` (shape ``(..., m)``)."""
        p = np.zeros(m)
        n = min(m, len(self.profile))
        p[:n] = self.profile[:n]
        return np.multiply.outer(self.temporal(t), p)


ZERO_FORCING = ForcingSignal()


@dataclass(frozen=True)
class HullShift:
    """The time-translate ``theta_tau g`` of the forcing."""

    tau: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.tau):
            raise ValueError("shift must be finite")


# ------------------------------------------------------------------- model


@dataclass(frozen=True, eq=False)
class SpectralModel:
    modes: int
    mu: float
    f: Nonlinearity = NONLINEARITIES["arctan2"]
    forcing: ForcingSignal = ZERO_FORCING
    quad_factor: int = 4

    def __post_init__(self):
        if self.modes < 1:
            raise ConfigurationRejected("need at least one mode")
        if isinstance(self.f, str):
            object.__setattr__(self, "f", nonlinearity(self.f))
        k = np.arange(1, self.modes + 1)
        lam = (k * k).astype(float)
        if not np.any(lam == self.mu):
            raise ConfigurationRejected(
                f"mu={self.mu:g} is not an eigenvalue k^2 with k <= {self.modes}", mu=self.mu
            )
        q = self.quad_factor * self.modes
        x = np.arange(1, q) * np.pi / q
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weight", np.pi / q)
        object.__setattr__(self, "basis", np.sin(np.outer(k, x)))  # (m, Q-1)

    # index sets
    @property
    def minus(self) -> np.ndarray:
        return self.lam < self.mu

    @property
    def zero(self) -> np.ndarray:
        return self.lam == self.mu

    @property
    def plus(self) -> np.ndarray:
        return self.lam > self.mu

    @property
    def mu_plus(self) -> float:
        if not self.plus.any():
            raise ConfigurationRejected("no eigenvalue above mu; increase modes")
        return float(self.lam[self.plus].min())

    @property
    def space_id(self) -> str:
        return f"sine[{self.modes}]"

    def coerce(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.modes:
            raise DimensionMismatch(f"state has {u.shape[-1]} modes, model has {self.modes}")
        return u

    def values(self, u) -> np.ndarray:
        """Grid values ``u(x_j)``."""
        return self.coerce(u) @ self.basis

    def inner(self, vals) -> np.ndarray:
        """``(2/pi) <vals, sin k.>`` for grid values (shape ``(..., Q-1)``)."""
        return (2 / np.pi) * self.weight * (vals @ self.basis.T)

    def norm_V(self, u):
        u = np.asarray(u, dtype=float)
        return np.sqrt(HALF_PI * np.sum(self.lam * u * u, axis=-1))

    def norm_L2(self, u):
        u = np.asarray(u, dtype=float)
        return np.sqrt(HALF_PI * np.sum(u * u, axis=-1))

    def norm_Lu(self, u):
        """``|L u|`` in ``L^2``."""
        u = np.asarray(u, dtype=float)
        return np.sqrt(HALF_PI * np.sum(((self.lam - self.mu) * u) ** 2, axis=-1))

    def unit(self, k: int) -> np.ndarray:
        e = np.zeros(self.modes)
        e[k - 1] = 1.0
        return e


def galerkin_rhs(model: SpectralModel, u, shift: HullShift = HullShift(), t: float = 0.0):
    """``-(lam_k - mu) u_k + (2/pi) <f(u) + g(., t + tau), sin k.>``."""
    u = model.coerce(u)
    nl = model.inner(model.f(model.values(u)))
    g = model.forcing.coefficients(model.modes, t + shift.tau)
    return -(model.lam - model.mu) * u + nl + g


def project(model: SpectralModel, u, sector: str) -> np.ndarray:
    mask = {"minus": model.minus, "zero": model.zero, "plus": model.plus}.get(sector)
    if mask is None:
        raise ValueError(f"sector must be minus, zero or plus, not {sector!r}")
    return np.where(mask, model.coerce(u), 0.0)


def J_eval(model: SpectralModel, u):
    """``1/2 (||u||^2 - mu |u|^2) - int F(u)``; vectorized over leading axes."""
    u = model.coerce(u)
    quad = 0.5 * HALF_PI * np.sum((model.lam - model.mu) * u * u, axis=-1)
    val = quad - model.weight * np.sum(model.f.F(model.values(u)), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def flow_model(
    model: SpectralModel,
    shift: HullShift = HullShift(),
    *,
    dt: float = 0.05,
    blow_up_norm: float = 1e200,
) -> FlowModel:
    """ETDRK4 flow of the Galerkin system; the forcing is read at ``t + tau``."""
    lam_mu = model.lam - model.mu

    def nonlinear(u, t):
        return model.inner(model.f(model.values(u))) + model.forcing.coefficients(model.modes, t + shift.tau)

    def rhs(u, t):
        return -lam_mu * u + nonlinear(u, t)

    return FlowModel(
        model.modes,
        rhs,
        space_id=model.space_id,
        dt_max=dt,
        blow_up_norm=blow_up_norm,
        method="etdrk4",
        linear=lam_mu,
        nonlinear=nonlinear,
        norm=model.norm_V,
        label=f"resonant(m={model.modes}, mu={model.mu:g}, f={model.f.name})",
    )


# ------------------------------------------------------- structural checks


def landesman_lazer_margins(model: SpectralModel, forcing: ForcingSignal | None = None) -> tuple[float, float]:
    """``(f_bar + inf g, f_under - sup g)``; both must be positive."""
    forcing = model.forcing if forcing is None else forcing
    m1 = model.f.f_bar + forcing.inf_g
    m2 = model.f.f_under - forcing.sup_g
    if m1 <= 0 or m2 <= 0:
        raise ConfigurationRejected(
            f"Landesman-Lazer margins not positive: m1={m1:.6g}, m2={m2:.6g}", m1=m1, m2=m2
        )
    return m1, m2


@dataclass
class KappaReport:
    kappa: float
    c0: float
    passed: bool
    worst_margin: float
    grid_span: float


def kappa_bound_check(model: SpectralModel, s_grid) -> tuple[float, float, KappaReport]:
    """``F(s) >= kappa |s| - c0`` with ``kappa = min(f_bar, f_under) / 2``.

    ``c0`` is the largest deficit on ``s_grid``; the bound is then
    re-checked on a grid ten times denser and twice as wide.
    """
    s = np.asarray(s_grid, dtype=float)
    span = float(min(-s.min(), s.max()))
    if span < 1e3:
        raise PreconditionError("s_grid must cover at least [-1e3, 1e3]")
    kappa = 0.5 * min(model.f.f_bar, model.f.f_under)
    if kappa <= 0:
        raise ConfigurationRejected(
            f"f={model.f.name}: f_bar={model.f.f_bar:g}, f_under={model.f.f_under:g} must be positive",
            f_bar=model.f.f_bar,
            f_under=model.f.f_under,
        )
    deficit = kappa * np.abs(s) - model.f.F(s)
    c0 = float(deficit.max())
    dense = np.linspace(2 * s.min(), 2 * s.max(), 10 * len(s) + 1)
    margin = model.f.F(dense) - (kappa * np.abs(dense) - c0)
    worst = float(margin.min())
    ok = bool(np.isfinite(c0) and worst >= -1e-9 * max(1.0, abs(c0)))
    if not ok:
        raise ConfigurationRejected(
            f"deficit kappa|s| - F(s) keeps growing (worst margin {worst:.3g})", worst=worst
        )
    return kappa, c0, KappaReport(kappa, c0, ok, worst, span)


@dataclass
class Thresholds:
    c1: float
    rho1: float
    lam: float
    eps: float
    C_eps: float
    mu_plus: float
    level: float  # 3 M |Omega|^{1/2}
    c1_bound: float | None  # closed-form bound, valid when F >= 0
    min_margin: float  # min |Lv| - level over tested v with J(v) >= c1
    tested: int

    def summary(self) -> dict:
        return {
            "c1": self.c1,
            "c1_closed_form_bound": "n/a" if self.c1_bound is None else self.c1_bound,
            "rho1": self.rho1,
            "lambda": self.lam,
            "epsilon": self.eps,
            "C_eps": self.C_eps,
            "C_eps_formula": "(M + sup|g|)^2 |Omega| / (4 eps)",
            "mu_plus": self.mu_plus,
            "Lv_level": self.level,
            "c1_min_margin": self.min_margin,
            "c1_tested": self.tested,
        }


def _c1_samples(model: SpectralModel, n: int, rng) -> np.ndarray:
    m = model.modes
    out = []
    k = model.k
    for i in range(n):
        fam = i % 4
        scale = 10 ** rng.uniform(-2, 2)
        if fam == 0:  # broad random spectrum
            v = rng.standard_normal(m) / k
        elif fam == 1:  # a single mode
            v = np.zeros(m)
            v[rng.integers(m)] = rng.choice([-1.0, 1.0])
        elif fam == 2:  # lowest positive modes only
            v = np.where(model.plus, rng.standard_normal(m) / k**2, 0.0)
        else:  # positive part plus small resonant/negative part
            v = np.where(model.plus, rng.standard_normal(m) / k, 0.1 * rng.standard_normal(m))
        out.append(scale * v)
    return np.array(out)


def invariance_thresholds(model: SpectralModel, *, samples: int = 20000, seed: int = 0) -> Thresholds:
    """Constants behind forward invariance of ``{||P+ v|| <= rho, J <= c}``.

    ``lambda = (mu+ - mu) / 2`` and ``rho1^2 = C_eps / lambda`` with
    ``C_eps = (M + sup|g|)^2 |Omega| / (4 eps)``: the Young-inequality
    constant in ``d/dt ||u+||^2 <= -2 lambda ||u+||^2 + 2 C_eps``.

    ``c1`` is the smallest sampled level above every tested ``v`` with
    ``|Lv| <= 3 M |Omega|^{1/2}``.
    """
    mu_plus = model.mu_plus
    eps = (mu_plus - model.mu) / (2 * mu_plus)
    lam = (1 - eps) * mu_plus - model.mu
    M = model.f.sup_abs
    sup_g = model.forcing.sup_g
    C_eps = (M + sup_g) ** 2 * DOMAIN_MEASURE / (4 * eps)
    rho1 = float(np.sqrt(C_eps / lam))
    level = 3 * M * np.sqrt(DOMAIN_MEASURE)

    rng = np.random.default_rng(seed)
    v = _c1_samples(model, samples, rng)
    J = J_eval(model, v)
    Lv = model.norm_Lu(v)
    bad = Lv <= level
    if bad.any():
        top = J[bad].max()
        above = J[J > top]
        c1 = float(above.min()) if above.size else float(top)
    else:
        c1 = float(J.min())
    sel = J >= c1
    min_margin = float((Lv[sel] - level).min()) if sel.any() else float("inf")

    s = np.linspace(-1e3, 1e3, 20001)
    c1_bound = None
    if np.all(model.f.F(s) >= -1e-12):
        # F >= 0 gives J(v) <= <Lv, v>/2 <= |Lv|^2 / (2 (mu+ - mu))
        c1_bound = level**2 / (2 * (mu_plus - model.mu))
    return Thresholds(c1, rho1, lam, eps, C_eps, mu_plus, level, c1_bound, min_margin, samples)


# ------------------------------------------------------ invariant region


def region_margins(model: SpectralModel, u, c: float, rho: float):
    """Margins of ``||P+ u|| <= rho`` and ``J(u) <= c``."""
    up = np.where(model.plus, u, 0.0)
    return model.norm_V(up) - rho, J_eval(model, u) - c


def sample_region(model: SpectralModel, c: float, rho: float, n: int, seed: int = 0, w_scale: float = 3.0) -> np.ndarray:
    """Random states in ``N_{c,rho}``: ``u+`` uniform in norm up to ``rho``
    (half of them close to the boundary), other modes uniform in
    ``[-w_scale, w_scale]``.  Candidates with ``J > c`` are redrawn."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        u = np.where(model.plus, rng.standard_normal(model.modes) / model.k, 0.0)
        r = rho * (rng.uniform(0.9, 1.0) if len(out) % 2 else rng.uniform(0.0, 1.0))
        nv = model.norm_V(u)
        u = u * (r / nv) if nv > 0 else u
        u = u + np.where(model.plus, 0.0, rng.uniform(-w_scale, w_scale, model.modes))
        pm, jm = region_margins(model, u, c, rho)
        if pm <= 0 and jm <= 0:
            out.append(u)
    return np.array(out)


@dataclass
class RegionViolation:
    sample: int
    kind: str
    time: float
    margin: float


@dataclass
class RegionReport:
    samples: int
    violations: list[RegionViolation]
    max_plus_margin: float
    max_J_margin: float
    max_envelope_excess: float
    max_J_increase_above_c1: float
    exploded: int
    witness: Trajectory | None = None
    thresholds: Thresholds | None = None

    @property
    def passed(self) -> bool:
        return not self.violations and self.exploded == 0

    def summary(self) -> dict:
        return {
            "samples": self.samples,
            "violations": len(self.violations),
            "exploded": self.exploded,
            "max_plus_margin": self.max_plus_margin,
            "max_J_margin": self.max_J_margin,
            "max_envelope_excess": self.max_envelope_excess,
            "max_J_increase_above_c1": self.max_J_increase_above_c1,
            "passed": self.passed,
        }


def invariant_region_check(
    model: SpectralModel,
    forcing: ForcingSignal | None,
    c: float,
    rho: float,
    samples,
    horizon: float,
    tol: float = 1e-6,
    *,
    dt: float = 0.05,
    thresholds: Thresholds | None = None,
) -> RegionReport:
    """Forward invariance of ``N_{c,rho}`` and the decay envelope

        ||u+(t)||^2 <= ||u+(0)||^2 e^{-2 lambda t} + rho1^2 (1 - e^{-2 lambda t})

    along the trajectories of all ``samples``.
    """
    if forcing is not None and forcing != model.forcing:
        model = SpectralModel(model.modes, model.mu, model.f, forcing, model.quad_factor)
    th = thresholds or invariance_thresholds(model)
    if not (c > th.c1 and rho > th.rho1):
        raise PreconditionError(f"need c > c1={th.c1:.6g} and rho > rho1={th.rho1:.6g}")
    if th.c1_bound is not None and c <= th.c1_bound:
        log.warning("c=%.6g does not exceed the closed-form bound %.6g", c, th.c1_bound)
    u0 = np.array([model.coerce(s) for s in samples], dtype=float)
    for i, u in enumerate(u0):
        pm, jm = region_margins(model, u, c, rho)
        if pm > tol or jm > tol:
            raise PreconditionError(f"sample {i} is outside N_(c,rho)")
    fm = flow_model(model, dt=dt)
    batch = evolve_batch(fm, u0, horizon)
    t = batch.times
    X = batch.states  # (n_t, n_s, m)
    pm, jm = region_margins(model, X, c, rho)
    plus_sq = model.norm_V(np.where(model.plus, X, 0.0)) ** 2
    decay = np.exp(-2 * th.lam * t)[:, None]
    envelope = plus_sq[0][None, :] * decay + th.rho1**2 * (1 - decay)
    excess = plus_sq - envelope
    J = jm + c
    dJ = np.diff(J, axis=0)
    above = (J[:-1] >= th.c1) & (J[1:] >= th.c1)
    J_inc = float(np.max(np.where(above, dJ, -np.inf), initial=0.0))

    violations = []
    for name, arr in (("plus-norm", pm), ("J-level", jm), ("envelope", excess)):
        bad = np.argwhere(arr > tol)
        for j in np.unique(bad[:, 1]) if bad.size else []:
            k = int(np.argmax(arr[:, j]))
            violations.append(RegionViolation(int(j), name, float(t[k]), float(arr[k, j])))
    exploded = int(np.sum(~np.isnan(batch.exploded_at)))
    witness = None
    if violations:
        j = violations[0].sample
        witness = Trajectory(t, X[:, j, :], Status(), fm.space_id)
    return RegionReport(
        len(u0), violations, float(pm.max()), float(jm.max()), float(excess.max()), J_inc, exploded, witness, th
    )


# ------------------------------------------------------- Bebutov metric


def _as_record(rec):
    if isinstance(rec, tuple):
        return np.asarray(rec[0], float), np.asarray(rec[1], float)
    return np.asarray(rec.times, float), np.asarray(rec.states, float)


def _euclid(v):
    return np.linalg.norm(v, axis=-1)


def bebutov_distance(traj_u, traj_v, n_max: int = 5, norm=None) -> tuple[float, float]:
    """Truncated compact-open distance and the truncation bound ``2^-n_max``.

    ``sum_{n=1}^{n_max} 2^-n d_n / (1 + d_n)`` with ``d_n`` the largest
    state distance over samples ``|t| <= n``.  Records are
    ``(times, states)`` pairs or trajectories; ``traj_v`` is linearly
    interpolated onto the times of ``traj_u``.
    """
    norm = norm or _euclid
    tu, xu = _as_record(traj_u)
    tv, xv = _as_record(traj_v)
    for tt in (tu, tv):
        if tt[0] > -n_max + 1e-12 or tt[-1] < n_max - 1e-12:
            raise PreconditionError(f"record does not cover [-{n_max}, {n_max}]")
    sel = np.abs(tu) <= n_max + 1e-12
    ts = tu[sel]
    a = xu[sel].reshape(len(ts), -1)
    if tv.shape == tu.shape and np.array_equal(tv, tu):
        b = xv[sel].reshape(len(ts), -1)
    else:
        xv2 = xv.reshape(len(tv), -1)
        b = np.column_stack([np.interp(ts, tv, xv2[:, j]) for j in range(xv2.shape[1])])
    dist = norm(a - b)
    total = 0.0
    for n in range(1, n_max + 1):
        d = float(dist[np.abs(ts) <= n + 1e-12].max())
        total += 2.0**-n * d / (1 + d)
    return total, 2.0**-n_max


def _uniform(record):
    t, x = _as_record(record)
    dt = np.diff(t)
    if dt.size == 0 or not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-12):
        raise PreconditionError("record must be sampled on a uniform time grid")
    return t, x.reshape(len(t), -1), float(dt[0])


def shift_distances(record, n_max: int = 5, norm=None):
    """Bebutov distance between the record and all its shifts.

    The reference point is ``t0 = t[0] + n_max``; returns the admissible
    shift instants ``tau`` in ``[t0, T - n_max]`` and ``D(tau)``.
    """
    norm = norm or _euclid
    t, x, dt = _uniform(record)
    w = int(round(n_max / dt))
    n_tau = len(t) - 2 * w
    if n_tau < 1:
        raise PreconditionError("record shorter than 2 n_max")
    i0 = w
    ref = x[i0 - w : i0 + w + 1]
    D = np.zeros(n_tau)
    run = np.zeros(n_tau)
    taus = np.arange(w, w + n_tau)
    n_next = 1
    for j in range(w + 1):
        for sgn in ((0,) if j == 0 else (-j, j)):
            e = norm(x[taus + sgn] - ref[w + sgn])
            np.maximum(run, e, out=run)
        while n_next <= n_max and (j + 1) * dt > n_next + 1e-9:
            D += 2.0**-n_next * run / (1 + run)
            n_next += 1
    while n_next <= n_max:
        D += 2.0**-n_next * run / (1 + run)
        n_next += 1
    return t[taus], D


def _worst_gap(taus, good, lo, hi) -> float:
    pts = taus[good]
    if pts.size == 0:
        return hi - lo
    edges = np.concatenate([[lo], pts, [hi]])
    return float(np.max(np.diff(edges)))


@dataclass
class RecurrenceResult:
    passed: bool
    smallest_l: float | None
    rows: list[tuple[float, float, float, bool]]  # (l, eps, worst_gap, pass)
    truncation: float

    RECURRENCE_HEADER = ("l", "eps", "worst_gap", "pass")


def recurrence_test(record, eps: float, l_grid: Sequence[float], n_max: int = 5, norm=None) -> RecurrenceResult:
    """Every window of length ``l`` inside ``[n_max, T - n_max]`` must
    contain a shift ``tau`` whose Bebutov distance to the record is
    below ``eps``.  Equivalently, gaps between such shifts (and to the
    range ends) are at most ``l``."""
    t, _, _ = _uniform(record)
    l_grid = sorted(float(l) for l in l_grid)
    if t[-1] - t[0] < 3 * l_grid[-1]:
        raise PreconditionError("record must span at least 3 * max(l_grid)")
    taus, D = shift_distances(record, n_max, norm)
    gap = _worst_gap(taus, D < eps, taus[0], taus[-1])
    rows = [(l, eps, gap, gap <= l) for l in l_grid]
    passing = [l for l, _, _, ok in rows if ok]
    return RecurrenceResult(bool(passing), passing[0] if passing else None, rows, 2.0**-n_max)


def recurrence_defect(record, l: float, n_max: int = 5, norm=None) -> float:
    """Smallest ``eps`` for which windows of length ``l`` all contain a
    shift closer than ``eps`` (the max over windows of the window min)."""
    taus, D = shift_distances(record, n_max, norm)
    dt = taus[1] - taus[0]
    size = max(1, int(np.floor(l / dt + 1e-9)) + 1)
    if size >= len(D):
        return float(D.min())
    half = size // 2
    centered = minimum_filter1d(D, size, mode="nearest")
    return float(centered[half : len(D) - (size - half) + 1].max())


# ------------------------------------------------ bounded solution search


def _exp_trapezoid_weights(rate: float, h: float):
    """Weights of ``int_0^h e^{-rate (h-s)} R(s) ds`` for ``R`` linear
    between ``R(0)`` (first) and ``R(h)`` (second); ``rate`` may be negative."""
    z = rate * h
    if abs(z) < 1e-4:
        i0 = h * (1 - z / 2 + z * z / 6)
        i1 = h * h * (0.5 - z / 3 + z * z / 8)
    else:
        i0 = -np.expm1(-z) / rate
        i1 = (1 - np.exp(-z) * (1 + z)) / rate**2
    # sigma = h - s is the time before the endpoint
    return i1 / h, i0 - i1 / h


def _dichotomy_sweep(R: np.ndarray, rates: np.ndarray, h: float, u0_stable: np.ndarray) -> np.ndarray:
    """Solve ``u_k' = -rate_k u_k + R_k(t)`` on a grid: forward from
    ``u0_stable`` for ``rate > 0``, backward from ``0`` at the end for
    ``rate < 0``."""
    n, m = R.shape
    out = np.empty_like(R)
    for k in range(m):
        a = rates[k]
        if a > 0:
            w0, w1 = _exp_trapezoid_weights(a, h)
            x = np.empty(n)
            x[0] = 0.0
            x[1:] = w0 * R[:-1, k] + w1 * R[1:, k]
            E = np.exp(-a * h)
            y, _ = lfilter([1.0], [1.0, -E], x, zi=[u0_stable[k]])
            out[:, k] = y
        else:
            b = -a
            # backward: u_n = e^{-b h} u_{n+1} - int_0^h e^{-b s} R(t_n + s) ds
            w1, w0 = _exp_trapezoid_weights(b, h)  # w0 multiplies R_n, w1 R_{n+1}
            x = np.empty(n)
            x[-1] = 0.0
            x[:-1] = -(w0 * R[:-1, k] + w1 * R[1:, k])
            E = np.exp(-b * h)
            y = lfilter([1.0], [1.0, -E], x[::-1])[::-1]
            out[:, k] = y
    return out


@dataclass
class BoundedSolution:
    record: Trajectory
    seed_index: int
    sup_norm: float
    J_range: tuple[float, float]
    recurrence_eps: float
    reference_l: float
    defect: float
    picard_iterations: int
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "seed_index": self.seed_index,
            "sup_norm": self.sup_norm,
            "J_min": self.J_range[0],
            "J_max": self.J_range[1],
            "recurrence_eps_at_l": self.recurrence_eps,
            "reference_l": self.reference_l,
            "forward_defect": self.defect,
            "picard_iterations": self.picard_iterations,
        }
        out.update(self.diagnostics)
        return out


def _window_defect(model, fm_dt, record_t, record_x, starts, length) -> float:
    fm = flow_model(model, dt=fm_dt)
    worst = 0.0
    h = record_t[1] - record_t[0]
    step = int(round(length / h))
    for i in starts:
        fmi = FlowModel(
            fm.dim, fm.rhs, space_id=fm.space_id, dt_max=fm_dt, method="etdrk4",
            linear=fm.linear, nonlinear=_shifted(fm.nonlinear, record_t[i]), norm=fm.norm,
            blow_up_norm=fm.blow_up_norm,
        )
        tr = evolve(fmi, record_x[i], length, sample_dt=step * h)
        ref = record_x[i + step]
        worst = max(worst, float(model.norm_V(tr.final - ref)))
    return worst


def _shifted(nonlinear, t0):
    return lambda u, t: nonlinear(u, t + t0)


def bounded_solution_search(
    model: SpectralModel,
    forcing: ForcingSignal | None,
    seeds,
    transient: float,
    record_horizon: float,
    *,
    c: float | None = None,
    h: float = 0.05,
    record_dt: float = 0.1,
    tail: float = 50.0,
    reference_l: float = 100.0,
    n_max: int = 5,
    picard_tol: float = 1e-11,
    max_picard: int = 200,
    check_windows: int = 20,
    check_length: float = 0.2,
) -> BoundedSolution:
    """Bounded full-time record of the forced Galerkin system.

    The modes where ``lam_k - mu - f'(0)`` is negative grow forward in
    time, so plain forward integration leaves every bounded set.  The
    record is instead the fixed point of

        u_k(t) = e^{-a_k t} u_k(0) + int_0^t e^{-a_k (t-s)} R_k(s) ds        (a_k > 0)
        u_k(t) = -int_t^T e^{a_k (s-t)} R_k(s) ds                           (a_k < 0)

    with ``a_k = lam_k - mu - f'(0)`` and ``R = f-part + g - f'(0) u``,
    iterated on a grid of step ``h`` over ``[0, transient + record_horizon + tail]``.
    The seed supplies ``u_k(0)`` on the stable modes.  The transient and
    the tail are discarded, and the kept record is checked against short
    forward integrations started on it (``forward_defect``).
    """
    if forcing is not None and forcing != model.forcing:
        model = SpectralModel(model.modes, model.mu, model.f, forcing, model.quad_factor)
    fp0 = float(model.f.df(0.0))
    rates = model.lam - model.mu - fp0
    if np.any(rates == 0):
        raise ConfigurationRejected("linearization at 0 has a neutral mode; no dichotomy", rates=rates)
    total = transient + record_horizon + tail
    n = int(round(total / h)) + 1
    t = np.arange(n) * h
    gk = model.forcing.coefficients(model.modes, t)
    stride = int(round(record_dt / h))
    i_a = int(round(transient / h))
    i_b = int(round((transient + record_horizon) / h))

    best = None
    failures = []
    for si, seed in enumerate(np.atleast_2d(np.asarray(seeds, dtype=float))):
        seed = model.coerce(seed)
        u0s = np.where(rates > 0, seed, 0.0)
        u = np.zeros((n, model.modes))
        u[0] = u0s
        converged = False
        for it in range(1, max_picard + 1):
            R = model.inner(model.f(model.values(u))) + gk - fp0 * u
            new = _dichotomy_sweep(R, rates, h, u0s)
            if not np.all(np.isfinite(new)):
                break
            change = float(np.max(np.abs(new - u)))
            u = new
            if change < picard_tol * max(1.0, float(np.max(np.abs(u)))):
                converged = True
                break
        if not converged:
            failures.append(si)
            log.warning("seed %d: fixed-point sweep did not converge", si)
            continue
        keep = slice(i_a, i_b + 1, stride)
        rec_t = t[keep] - t[i_a]
        rec_x = u[keep]
        rec = Trajectory(rec_t, rec_x, Status(), model.space_id)
        eps_l = recurrence_defect(rec, reference_l, n_max, model.norm_V)
        if best is None or eps_l < best[0]:
            best = (eps_l, si, it, rec, u, keep)
    if best is None:
        raise PreconditionError(f"no seed produced a bounded record (failed: {failures})")
    eps_l, si, iters, rec, u, keep = best
    Jv = J_eval(model, rec.states)
    if c is not None and (Jv.max() > c or Jv.min() < -c):
        log.warning("record J-range [%.3g, %.3g] leaves [-c, c]", Jv.min(), Jv.max())
    idx = np.arange(i_a, i_b - int(round(check_length / h)), max(1, (i_b - i_a) // check_windows))
    defect = _window_defect(model, h / 5, t, u, idx[:check_windows], check_length)
    sup = float(np.max(model.norm_V(rec.states)))
    return BoundedSolution(
        rec, si, sup, (float(Jv.min()), float(Jv.max())), eps_l, reference_l, defect, iters,
        {"failed_seeds": len(failures), "grid_step": h, "record_dt": record_dt},
    )
