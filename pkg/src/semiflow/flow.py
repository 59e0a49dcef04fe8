"""Local semiflows on finite-dimensional state spaces.

A :class:`FlowModel` realizes ``G(t)x`` for ``u' = F(u, t)`` together with
a norm threshold standing in for a finite escape time: a trajectory whose
norm reaches ``blow_up_norm`` is reported as exploded.  Everything here is
pure given its inputs; two calls with the same arguments return identical
arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import integrators as _int
from .errors import DimensionMismatch, PreconditionError, UnboundedTail
from .regions import Region

log = logging.getLogger(__name__)

COMPLETED = "completed"
EXPLODED = "exploded"
ESCAPED = "escaped"


def euclidean(x):
    return np.linalg.norm(x, axis=-1)


@dataclass(frozen=True)
class StateVector:
    """A point of the phase space tagged with its discretization."""

    coords: np.ndarray
    space_id: str = "R^d"

    def __post_init__(self):
        c = np.array(self.coords, dtype=float, copy=True).reshape(-1)
        if c.size == 0:
            raise DimensionMismatch("state must have dimension >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("state has non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __len__(self):
        return self.coords.size


@dataclass(frozen=True, eq=False)
class FlowModel:
    """Vector field plus integrator policy.

    ``rhs(x, t)`` must accept states of shape ``(..., dim)``.  For the
    split schemes (``etdrk4``, ``imex_euler``) the field is
    ``-linear @ x + nonlinear(x, t)``; ``linear`` is a diagonal array for
    ``etdrk4`` and a sparse matrix for ``imex_euler``.
    """

    dim: int
    rhs: Callable
    space_id: str = "R^d"
    dt_max: float = 0.1
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    blow_up_norm: float = 1e6
    method: str = "dopri5"
    linear: object = None
    nonlinear: Callable | None = None
    norm: Callable = euclidean
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not (self.dt_max > 0 and self.blow_up_norm > 0):
            raise ValueError("dt_max and blow_up_norm must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.method not in _int.METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method != "dopri5" and (self.linear is None or self.nonlinear is None):
            raise ValueError(f"{self.method} needs linear and nonlinear parts")

    @property
    def adaptive(self) -> bool:
        return self.method in _int.ADAPTIVE

    def coerce(self, x) -> np.ndarray:
        """Validate ``x`` against this model and return a float copy."""
        if isinstance(x, StateVector):
            if x.space_id != self.space_id:
                raise DimensionMismatch(
                    f"state lives in {x.space_id!r}, model in {self.space_id!r}"
                )
            y = np.array(x.coords, dtype=float)
        else:
            y = np.array(x, dtype=float).reshape(-1)
        if y.size != self.dim:
            raise DimensionMismatch(f"state has dimension {y.size}, model expects {self.dim}")
        if not np.all(np.isfinite(y)):
            raise ValueError("initial state has non-finite entries")
        return y

    def state(self, coords) -> StateVector:
        return StateVector(coords, self.space_id)

    def field_norm(self, x, t: float = 0.0) -> float:
        return float(self.norm(self.rhs(np.asarray(x, float), t)))


@dataclass(frozen=True)
class Status:
    kind: str = COMPLETED
    time: float | None = None

    def __str__(self):
        return self.kind if self.time is None else f"{self.kind}({self.time:.12g})"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    status: Status
    space_id: str = "R^d"

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def exploded(self) -> bool:
        return self.status.kind == EXPLODED

    def __len__(self):
        return len(self.times)


@dataclass
class BatchTrajectory:
    """Trajectories of many initial states sampled on a common time grid.

    Rows that blow up are frozen at their last finite state and their
    explosion time recorded in ``exploded_at`` (``nan`` otherwise).
    """

    times: np.ndarray
    states: np.ndarray  # (n_times, n_members, dim)
    exploded_at: np.ndarray

    def member(self, i: int) -> np.ndarray:
        return self.states[:, i, :]


@dataclass
class LimitSetEstimate:
    points: np.ndarray
    sample_window: tuple[float, float]
    cluster_tol: float
    space_id: str = "R^d"


def _snap(h: float, gap: float) -> float:
    """Avoid sliver steps: take the whole remaining gap when nearly equal."""
    if gap - h <= 1e-8 * max(h, 1e-300):
        return gap
    return h


class _Stepper:
    """Stateful step driver shared by ``evolve`` and ``evolve_batch``."""

    def __init__(self, model: FlowModel, y: np.ndarray, t0: float = 0.0):
        self.model = model
        self.k1 = None
        self.ks = None
        if model.adaptive:
            self.h = _int.initial_step(
                model.rhs, t0, y, model.abs_tol, model.rel_tol, model.dt_max
            )
        else:
            self.h = model.dt_max

    def single(self, t, y, h):
        """One raw step of size ``h`` without error control."""
        m = self.model
        if m.adaptive:
            return _int.dopri5_step(m.rhs, t, y, h)[0]
        h_eff = m.dt_max if abs(h - m.dt_max) <= 1e-9 * m.dt_max else h
        return _int.fixed_step(m, t, y, h_eff)

    def advance(self, t, y, gap):
        """Take one accepted step of size at most ``gap``.

        Returns ``(h, y_new)``; ``y_new`` is None when the adaptive
        controller broke down (step size underflow).
        """
        m = self.model
        if not m.adaptive:
            h = _snap(min(m.dt_max, gap), gap)
            return h, self.single(t, y, h)
        h_min = 1e-14 * max(1.0, abs(t))
        while True:
            proposed = min(self.h, m.dt_max)
            h = _snap(min(proposed, gap), gap)
            with np.errstate(over="ignore", invalid="ignore"):
                y_new, err, ks = _int.dopri5_step(m.rhs, t, y, h, self.k1)
            en = _int.error_norm(err, y, y_new, m.abs_tol, m.rel_tol)
            if en <= 1.0 and np.all(np.isfinite(y_new)):
                fac = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
                # a step clipped to the gap must not shrink the proposal
                self.h = max(proposed, h * fac) if h < proposed else h * fac
                self.k1 = ks[-1]
                self.ks = ks
                return h, y_new
            fac = 0.2 if not np.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
            self.h = h * fac
            if self.h < h_min:
                return h, None


def _crossed(model, y, region):
    if not np.all(np.isfinite(y)):
        return True
    if model.norm(y) >= model.blow_up_norm:
        return True
    return region is not None and region(y) > 0


def _event_status(model, y, region, t_event):
    # leaving the region wins over a simultaneous norm crossing
    if region is not None and region(y) > 0:
        return Status(ESCAPED, t_event)
    return Status(EXPLODED, t_event)


def _bisect_event(model, stepper, t, y, h, region):
    """Shrink ``[0, h]`` onto the first sub-step where an event fires."""
    lo, hi = 0.0, h
    y_hi = stepper.single(t, y, h)
    res = model.abs_tol
    while hi - lo > res:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            y_mid = stepper.single(t, y, mid)
        if _crossed(model, y_mid, region):
            hi, y_hi = mid, y_mid
        else:
            lo = mid
    return hi, y_hi


def evolve(
    model: FlowModel,
    x,
    horizon: float,
    *,
    region: Region | None = None,
    sample_dt: float | None = None,
) -> Trajectory:
    """Integrate ``model`` from ``x`` over ``[0, horizon]``.

    Every accepted step is recorded unless ``sample_dt`` is given, in which
    case steps are clipped to land on multiples of ``sample_dt`` and only
    those instants are kept.  With ``region`` the run stops at the first
    instant the margin becomes positive (status ``escaped``).
    """
    y = model.coerce(x)
    if horizon < 0:
        raise PreconditionError("horizon must be >= 0")
    if region is not None and region(y) > 0:
        raise PreconditionError(f"initial state outside region {region.label!r}")
    times, states = [0.0], [y.copy()]
    status = Status(COMPLETED)
    if horizon == 0:
        return Trajectory(np.array(times), np.array(states), status, model.space_id)

    stepper = _Stepper(model, y)
    dense = sample_dt is not None and model.adaptive
    t = 0.0
    k_sample = 1
    while t < horizon:
        if sample_dt is None or dense:
            target = horizon
        else:
            target = min(horizon, k_sample * sample_dt)
        h, y_new = stepper.advance(t, y, target - t)
        if y_new is None:
            log.warning("integrator breakdown at t=%.12g (step size underflow)", t)
            status = Status(EXPLODED, t)
            break
        t_new = target if h == target - t else t + h
        event = _crossed(model, y_new, region)
        if event:
            hi, y_hi = _bisect_event(model, stepper, t, y, h, region)
            t_new = t + hi
        if dense:
            # samples strictly inside the step come from the interpolant
            while k_sample * sample_dt < t_new and k_sample * sample_dt < horizon:
                ts = k_sample * sample_dt
                times.append(ts)
                states.append(_int.dopri5_dense(y, h, stepper.ks, (ts - t) / h))
                k_sample += 1
        if event:
            if not np.all(np.isfinite(y_hi)):
                log.warning("non-finite state at t=%.12g treated as blow-up", t_new)
                status = Status(EXPLODED, t_new)
                break
            times.append(t_new)
            states.append(y_hi)
            status = _event_status(model, y_hi, region, t_new)
            break
        t, y = t_new, y_new
        if sample_dt is None or t == target:
            times.append(t)
            states.append(y.copy())
            k_sample += sample_dt is not None and not dense
        elif dense and k_sample * sample_dt == t:
            times.append(t)
            states.append(y.copy())
            k_sample += 1
    return Trajectory(np.array(times), np.array(states), status, model.space_id)


def evolve_batch(model: FlowModel, xs, horizon: float, *, sample_dt: float | None = None) -> BatchTrajectory:
    """Integrate many initial states on one shared step sequence.

    Adaptive steps are controlled by the worst member.  Blow-up is
    detected per member at step resolution (no bisection).
    """
    ys = np.array([model.coerce(x) for x in xs], dtype=float)
    n = len(ys)
    exploded = np.full(n, np.nan)
    times, states = [0.0], [ys.copy()]
    if horizon == 0 or n == 0:
        return BatchTrajectory(np.array(times), np.array(states), exploded)
    active = np.arange(n)
    stepper = _Stepper(model, ys)
    t = 0.0
    k_sample = 1
    while t < horizon and active.size:
        target = horizon if sample_dt is None else min(horizon, k_sample * sample_dt)
        h, y_new = stepper.advance(t, ys[active], target - t)
        t_new = target if y_new is not None and h == target - t else t + h
        if y_new is None:
            exploded[active] = t
            log.warning("batch integrator breakdown at t=%.12g", t)
            break
        with np.errstate(over="ignore", invalid="ignore"):
            bad = ~np.all(np.isfinite(y_new), axis=-1) | (model.norm(y_new) >= model.blow_up_norm)
        good_rows = ~bad
        ys[active[good_rows]] = y_new[good_rows]
        if bad.any():
            exploded[active[bad]] = t_new
            active = active[good_rows]
            stepper.k1 = None
        t = t_new
        if sample_dt is None or t == target:
            times.append(t)
            states.append(ys.copy())
            k_sample += sample_dt is not None
    return BatchTrajectory(np.array(times), np.array(states), exploded)


@dataclass
class SemigroupCheck:
    deviation: float
    passed: bool
    applicable: bool = True


def check_semigroup(model: FlowModel, x, s: float, t: float, tol: float | None = None) -> SemigroupCheck:
    """Compare ``G(t+s)x`` with ``G(t)G(s)x``."""
    if s < 0 or t < 0:
        raise PreconditionError("s and t must be >= 0")
    tol = 10 * model.abs_tol if tol is None else tol
    direct = evolve(model, x, s + t)
    first = evolve(model, x, s)
    if direct.exploded or first.exploded:
        return SemigroupCheck(float("nan"), False, applicable=False)
    second = evolve(model, first.final, t)
    if second.exploded:
        return SemigroupCheck(float("nan"), False, applicable=False)
    dev = float(model.norm(direct.final - second.final))
    return SemigroupCheck(dev, dev <= tol)


FINITE = "finite"
NOT_BEFORE = "not_before"
BLOW_UP_INSIDE = "blow_up_inside"


@dataclass
class EscapeResult:
    kind: str
    time: float
    trajectory: Trajectory

    @property
    def finite(self) -> bool:
        return self.kind == FINITE


def escape_time(model: FlowModel, x, region: Region, t_max: float) -> EscapeResult:
    """First time the trajectory from ``x`` attains positive margin."""
    if region(model.coerce(x)) > 0:
        raise PreconditionError(f"x is outside region {region.label!r}")
    traj = evolve(model, x, t_max, region=region)
    kind = traj.status.kind
    if kind == ESCAPED:
        return EscapeResult(FINITE, traj.status.time, traj)
    if kind == EXPLODED:
        return EscapeResult(BLOW_UP_INSIDE, traj.status.time, traj)
    return EscapeResult(NOT_BEFORE, t_max, traj)


def farthest_point_clusters(samples: np.ndarray, radius: float, norm=euclidean) -> np.ndarray:
    """Greedy farthest-point cover of ``samples`` by balls of ``radius``.

    Representatives are pairwise further apart than ``radius`` and every
    sample lies within ``radius`` of one of them.
    """
    samples = np.asarray(samples, dtype=float)
    centers = [0]
    dmin = norm(samples - samples[0])
    while True:
        i = int(np.argmax(dmin))
        if dmin[i] <= radius:
            break
        centers.append(i)
        dmin = np.minimum(dmin, norm(samples - samples[i]))
    return samples[centers]


def omega_limit(
    model: FlowModel,
    x,
    burn_in: float,
    window: float,
    cluster_tol: float,
    *,
    sample_dt: float | None = None,
) -> LimitSetEstimate:
    if window <= 0 or burn_in < 0:
        raise PreconditionError("need burn_in >= 0 and window > 0")
    sample_dt = sample_dt or window / 2000
    traj = evolve(model, x, burn_in + window, sample_dt=sample_dt)
    if traj.exploded:
        raise UnboundedTail(f"trajectory exploded at {traj.status.time:.6g}")
    tail = traj.states[traj.times >= burn_in - 1e-12]
    norms = model.norm(tail)
    if norms.max() >= 2 * norms[0] and norms.max() > cluster_tol:
        raise UnboundedTail(
            f"norm grew from {norms[0]:.6g} to {norms.max():.6g} across the window"
        )
    pts = farthest_point_clusters(tail, cluster_tol, model.norm)
    return LimitSetEstimate(pts, (burn_in, burn_in + window), cluster_tol, model.space_id)


def distance_to_set(states, points, norm=euclidean) -> np.ndarray:
    states = np.atleast_2d(states)
    pts = np.atleast_2d(points)
    return np.min(norm(states[:, None, :] - pts[None, :, :]), axis=1)


@dataclass
class MonotonicityReport:
    max_increase: float
    passed: bool
    worst_index: int | None
    values: np.ndarray


def lyapunov_monotonicity(
    model: FlowModel,
    phi: Callable[[np.ndarray], float],
    traj: Trajectory,
    tol: float | None = None,
    floor: float | None = None,
) -> MonotonicityReport:
    """Largest increase of ``phi`` between consecutive samples.

    With ``floor`` only pairs whose both values are ``>= floor`` count.
    """
    tol = 10 * model.abs_tol if tol is None else tol
    vals = np.array([phi(s) for s in traj.states], dtype=float)
    if len(vals) < 2:
        return MonotonicityReport(0.0, True, None, vals)
    inc = np.diff(vals)
    if floor is not None:
        inc = np.where((vals[:-1] >= floor) & (vals[1:] >= floor), inc, -np.inf)
    i = int(np.argmax(inc))
    worst = float(max(inc[i], 0.0)) if np.isfinite(inc[i]) else 0.0
    return MonotonicityReport(worst, worst <= tol, i if worst > 0 else None, vals)


@dataclass
class AttractionEntry:
    attracted: bool
    entry_time: float | None
    status: Status
    final_distance: float


@dataclass
class AttractionReport:
    entries: list[AttractionEntry]

    @property
    def fraction(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.attracted for e in self.entries) / len(self.entries)


def attraction_probe(
    model: FlowModel,
    target: LimitSetEstimate | np.ndarray,
    starts: Sequence,
    horizon: float,
    eps: float,
    *,
    sample_dt: float | None = None,
) -> AttractionReport:
    """For each start, the time after which it stays within ``eps`` of ``target``."""
    pts = target.points if isinstance(target, LimitSetEstimate) else np.atleast_2d(target)
    sample_dt = sample_dt or horizon / 2000
    entries = []
    for x in starts:
        traj = evolve(model, x, horizon, sample_dt=sample_dt)
        d = distance_to_set(traj.states, pts, model.norm)
        if traj.exploded or d[-1] > eps:
            entries.append(AttractionEntry(False, None, traj.status, float(d[-1])))
            continue
        outside = np.nonzero(d > eps)[0]
        if outside.size == 0:
            t_in = 0.0
        else:
            k = outside[-1]
            # linear interpolation of the distance across the crossing
            d0, d1 = d[k], d[k + 1]
            frac = (d0 - eps) / (d0 - d1) if d0 != d1 else 1.0
            t_in = float(traj.times[k] + frac * (traj.times[k + 1] - traj.times[k]))
        entries.append(AttractionEntry(True, t_in, traj.status, float(d[-1])))
    return AttractionReport(entries)
