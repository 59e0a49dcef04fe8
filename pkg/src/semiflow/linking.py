"""Polyline surrogates for compact path families and the descending-flow
minimax search.

A :class:`DiscretePath` is deformed by pushing every unpinned node along
the flow for a short time.  The sup of a Lyapunov functional over the
nodes is then an upper estimate of the minimax value, which decreases
as the path is pulled over the lowest pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DeformationCollapse, PreconditionError
from .flow import FlowModel, evolve_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscretePath:
    nodes: np.ndarray  # (n, d)
    pinned: np.ndarray  # (n,) bool
    max_gap: float

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if len(nodes) < 2:
            raise PreconditionError("a path needs at least two nodes")
        pinned = np.zeros(len(nodes), bool) if self.pinned is None else np.array(self.pinned, bool)
        if pinned.shape != (len(nodes),):
            raise PreconditionError("pinned mask does not match nodes")
        pinned[0] = pinned[-1] = True
        if not self.max_gap > 0:
            raise PreconditionError("max_gap must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "pinned", pinned)

    @classmethod
    def segment(cls, a, b, n: int, max_gap: float | None = None) -> DiscretePath:
        a, b = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))
        s = np.linspace(0.0, 1.0, n)[:, None]
        nodes = (1 - s) * a + s * b
        gap = max_gap or 2.0 * np.linalg.norm(b - a) / max(n - 1, 1)
        return cls(nodes, None, gap)

    @classmethod
    def through(cls, points, n_per_leg: int, max_gap: float | None = None) -> DiscretePath:
        """Polyline through ``points`` with ``n_per_leg`` nodes per leg."""
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[0] == 1:
            pts = pts.T
        legs = [
            (1 - s) * pts[i] + s * pts[i + 1]
            for i in range(len(pts) - 1)
            for s in [np.linspace(0, 1, n_per_leg, endpoint=False)[:, None]]
        ]
        nodes = np.vstack(legs + [pts[-1:]])
        gap = max_gap or 2.0 * float(np.max(np.linalg.norm(np.diff(nodes, axis=0), axis=1)))
        return cls(nodes, None, gap)

    def __len__(self):
        return len(self.nodes)

    def gaps(self, norm=None) -> np.ndarray:
        norm = norm or (lambda v: np.linalg.norm(v, axis=-1))
        return norm(np.diff(self.nodes, axis=0))

    def refine(self, norm=None) -> DiscretePath:
        """Insert evenly spaced points on every segment longer than
        ``max_gap``.  Nodes are never removed."""
        g = self.gaps(norm)
        if np.all(g <= self.max_gap):
            return self
        nodes, pinned = [self.nodes[0]], [self.pinned[0]]
        for i, gi in enumerate(g):
            k = int(np.ceil(gi / self.max_gap)) if gi > self.max_gap else 1
            for j in range(1, k):
                s = j / k
                nodes.append((1 - s) * self.nodes[i] + s * self.nodes[i + 1])
                pinned.append(False)
            nodes.append(self.nodes[i + 1])
            pinned.append(self.pinned[i + 1])
        return DiscretePath(np.array(nodes), np.array(pinned), self.max_gap)


def linking_check_sphere(path: DiscretePath, center, radius: float, norm=None) -> tuple[bool, list[int]]:
    """Discrete intermediate-value check that the path crosses the sphere.

    Returns ``(True, indices)`` where ``i`` is listed when the signed
    distance ``|node - center| - radius`` changes sign between nodes
    ``i`` and ``i + 1`` (a zero counts with the following sign).
    """
    norm = norm or (lambda v: np.linalg.norm(v, axis=-1))
    c = np.asarray(center, float)
    s = norm(path.nodes - c) - radius
    if not (s[0] < 0 and s[-1] > 0):
        raise PreconditionError("path must start strictly inside and end strictly outside the sphere")
    sign = np.where(s < 0, -1, 1)
    idx = [int(i) for i in np.nonzero(sign[:-1] != sign[1:])[0]]
    return bool(idx), idx


def _lipschitz_estimate(phi, nodes) -> float:
    v = np.array([phi(x) for x in nodes])
    d = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    ok = d > 0
    return float(np.max(np.abs(np.diff(v))[ok] / d[ok])) if ok.any() else 0.0


def deform_path(
    model: FlowModel,
    path: DiscretePath,
    dt: float,
    *,
    clip: Callable[[np.ndarray], tuple[np.ndarray, float]] | None = None,
) -> DiscretePath:
    """Advance every unpinned node by ``dt`` along the flow, then refine.

    A node that blows up is replaced by the midpoint of its nearest
    surviving neighbours.  ``clip`` may map the moved nodes back into a
    constraint set; it returns the corrected nodes and the size of the
    correction, which is logged.
    """
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    free = np.nonzero(~path.pinned)[0]
    nodes = path.nodes.copy()
    if free.size == 0:
        return path
    batch = evolve_batch(model, nodes[free], dt)
    moved = batch.states[-1]
    blown = ~np.isnan(batch.exploded_at)
    if blown.all():
        raise DeformationCollapse(f"all {free.size} interior nodes blew up within dt={dt:g}")
    nodes[free[~blown]] = moved[~blown]
    if clip is not None:
        fixed, amount = clip(nodes[free[~blown]])
        nodes[free[~blown]] = fixed
        if amount > 0:
            log.info("cone clip moved nodes by up to %.3g", amount)
    alive = np.ones(len(nodes), bool)
    alive[free[blown]] = False
    for i in free[blown]:
        lo = max(j for j in range(i) if alive[j])
        hi = min(j for j in range(i + 1, len(nodes)) if alive[j])
        nodes[i] = 0.5 * (nodes[lo] + nodes[hi])
    if blown.any():
        log.info("replaced %d blown-up nodes by neighbour midpoints", int(blown.sum()))
    return replace(path, nodes=nodes).refine(model.norm)


@dataclass(frozen=True)
class MinimaxRecord:
    iteration: int
    c_estimate: float
    arg_node: int
    flow_residual: float

    def row(self):
        return (self.iteration, self.c_estimate, self.arg_node, self.flow_residual)


MINIMAX_HEADER = ["iter", "c_estimate", "arg_node", "flow_residual"]


def _record(model, phi, path, it) -> MinimaxRecord:
    vals = np.array([phi(x) for x in path.nodes])
    k = int(np.argmax(vals))
    return MinimaxRecord(it, float(vals[k]), k, model.field_norm(path.nodes[k]))


def minimax_estimate(
    model: FlowModel,
    phi: Callable[[np.ndarray], float],
    path: DiscretePath,
    max_iters: int,
    dt: float,
    stall_tol: float,
    *,
    stall_window: int = 10,
    clip=None,
    barrier: float | None = None,
) -> tuple[float, list[MinimaxRecord], DiscretePath]:
    """Deform ``path`` repeatedly and track ``sup phi`` over its nodes.

    Stops after ``max_iters`` deformations or once ``c_estimate`` has
    dropped by less than ``stall_tol`` over ``stall_window`` iterations.
    The last estimate approximates the minimax value from above.
    """
    pinned_max = max(phi(x) for x in path.nodes[path.pinned])
    if barrier is not None and not pinned_max < barrier:
        log.warning("pinned nodes reach phi=%.6g, not below barrier %.6g", pinned_max, barrier)
    records = [_record(model, phi, path, 0)]
    for it in range(1, max_iters + 1):
        try:
            path = deform_path(model, path, dt, clip=clip)
        except DeformationCollapse as exc:
            raise DeformationCollapse(str(exc), records) from exc
        records.append(_record(model, phi, path, it))
        if it >= stall_window:
            drop = records[it - stall_window].c_estimate - records[it].c_estimate
            if drop < stall_tol:
                break
    return records[-1].c_estimate, records, path


def monotone_budget(phi, records: Sequence[MinimaxRecord], path: DiscretePath, refinements: int) -> float:
    """Tolerated increase of ``c_estimate`` caused by refinement."""
    return max(refinements, 1) * path.max_gap * _lipschitz_estimate(phi, path.nodes)


def invariant_candidates(
    model: FlowModel,
    phi: Callable[[np.ndarray], float],
    final_path: DiscretePath,
    c: float,
    band: float,
    residual_tol: float,
) -> list[tuple[np.ndarray, float]]:
    """Nodes with ``|phi - c| <= band`` and field norm at most ``residual_tol``."""
    out = []
    for x in final_path.nodes:
        res = model.field_norm(x)
        if abs(phi(x) - c) <= band and res <= residual_tol:
            out.append((x.copy(), float(res)))
    if not out:
        log.info("no invariant candidates within band %.3g of c=%.6g", band, c)
    return out
