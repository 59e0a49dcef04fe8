"""Small built-in models with closed-form behaviour, used by probes and tests."""

from __future__ import annotations

import numpy as np

from .flow import FlowModel


def decay(**kw) -> FlowModel:
    """``u' = -u`` in one dimension."""
    return FlowModel(1, lambda x, t: -x, label="decay", **kw)


def repeller(**kw) -> FlowModel:
    """``u' = u``."""
    return FlowModel(1, lambda x, t: x.copy(), label="repeller", **kw)


def unit_speed(**kw) -> FlowModel:
    """``u' = 1``."""
    return FlowModel(1, lambda x, t: np.ones_like(x), label="unit-speed", **kw)


def quadratic_blowup(**kw) -> FlowModel:
    """``u' = u^2``; from ``u(0)=1`` the solution ``1/(1-t)`` explodes at ``t=1``."""
    return FlowModel(1, lambda x, t: x * x, label="quadratic-blowup", **kw)


def _hopf(x, t):
    r2 = x[..., 0:1] ** 2 + x[..., 1:2] ** 2
    out = x * (1 - r2)
    out[..., 0] -= x[..., 1]
    out[..., 1] += x[..., 0]
    return out


def hopf(**kw) -> FlowModel:
    """Planar normal form ``r' = r(1 - r^2)``, ``theta' = 1``."""
    return FlowModel(2, _hopf, label="hopf", **kw)


def hopf_radius(r0: float, t):
    """Closed-form radius of the Hopf normal form."""
    t = np.asarray(t, dtype=float)
    return 1.0 / np.sqrt(1.0 + (1.0 - r0 * r0) / (r0 * r0) * np.exp(-2.0 * t))


def saddle(**kw) -> FlowModel:
    """``(x, y)' = (x, -y)``."""
    return FlowModel(2, lambda x, t: x * np.array([1.0, -1.0]), label="saddle", **kw)


def double_well(x):
    """``f(x) = (x^2 - 1)^2``; saddle value ``f(0) = 1``."""
    x = np.asarray(x, dtype=float)
    return float(((x[..., 0] ** 2 - 1) ** 2).sum()) if x.ndim == 1 else (x[..., 0] ** 2 - 1) ** 2


def double_well_flow(**kw) -> FlowModel:
    return FlowModel(1, lambda x, t: -4 * x * (x * x - 1), label="double-well", **kw)


def quartic2d(x):
    """``phi(x, y) = x^4 - x^2 + y^2``; minima at ``(+-1/sqrt 2, 0)``, saddle at 0."""
    x = np.asarray(x, dtype=float)
    val = x[..., 0] ** 4 - x[..., 0] ** 2 + x[..., 1] ** 2
    return float(val) if x.ndim == 1 else val


def _quartic2d_flow(x, t):
    out = np.empty_like(x)
    out[..., 0] = -(4 * x[..., 0] ** 3 - 2 * x[..., 0])
    out[..., 1] = -2 * x[..., 1]
    return out


def quartic2d_flow(**kw) -> FlowModel:
    return FlowModel(2, _quartic2d_flow, label="quartic2d", **kw)


def builtin_models() -> dict[str, FlowModel]:
    """Bounded-horizon models used by the semigroup sweep."""
    return {
        "decay": decay(),
        "hopf": hopf(),
        "saddle": saddle(),
        "double-well": double_well_flow(),
        "quartic2d": quartic2d_flow(),
    }
