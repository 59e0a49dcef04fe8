"""Closed regions described by signed margin functions.

A margin is negative strictly inside, zero on the boundary and positive
outside.  Intersections take the pointwise max, unions the min, so
sub-level sets of functionals compose without any meshing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Region:
    margin: Callable[[np.ndarray], float]
    label: str = ""

    def __call__(self, x) -> float:
        return float(self.margin(np.asarray(x, dtype=float)))

    def contains(self, x, tol: float = 0.0) -> bool:
        return self(x) <= tol

    def margins(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        return np.array([self(s) for s in states.reshape(-1, states.shape[-1])]).reshape(
            states.shape[:-1]
        )

    def __and__(self, other: Region) -> Region:
        return Region(lambda x: max(self.margin(x), other.margin(x)), f"({self.label} & {other.label})")

    def __or__(self, other: Region) -> Region:
        return Region(lambda x: min(self.margin(x), other.margin(x)), f"({self.label} | {other.label})")


def whole_space(label: str = "R^d") -> Region:
    return Region(lambda x: -np.inf, label)


def ball(center, radius: float, norm=None, label: str | None = None) -> Region:
    c = np.asarray(center, dtype=float)
    nrm = norm or np.linalg.norm
    return Region(lambda x: float(nrm(x - c)) - radius, label or f"ball(r={radius:g})")


def box(lower, upper, label: str | None = None) -> Region:
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    return Region(lambda x: float(np.max(np.maximum(lo - x, x - hi))), label or "box")


def interval(lower: float, upper: float, label: str | None = None) -> Region:
    return box([lower], [upper], label or f"[{lower:g},{upper:g}]")


def sublevel(fn: Callable[[np.ndarray], float], level: float, label: str | None = None) -> Region:
    """``{x : fn(x) <= level}``."""
    return Region(lambda x: float(fn(x)) - level, label or f"sublevel({level:g})")


def band(fn: Callable[[np.ndarray], float], lower: float, upper: float, label: str | None = None) -> Region:
    """``{x : lower <= fn(x) <= upper}``."""

    def margin(x):
        v = float(fn(x))
        return max(lower - v, v - upper)

    return Region(margin, label or f"band[{lower:g},{upper:g}]")


def point_set(points, label: str | None = None) -> Region:
    """Finite set of points; margin is the distance to the nearest one."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return Region(lambda x: float(np.min(np.linalg.norm(pts - x, axis=-1))), label or "points")
