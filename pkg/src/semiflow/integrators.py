"""Single-step integrators used by :mod:`semiflow.flow`.

Three schemes are provided:

``dopri5``
    Adaptive Dormand-Prince 5(4) pair with local extrapolation.
``etdrk4``
    Fixed-step exponential time differencing RK4 (Cox-Matthews) for
    ``u' = -A u + N(u, t)`` with diagonal ``A``.  The phi-functions are
    evaluated by contour averaging, which is stable for zero and
    near-zero diagonal entries.
``imex_euler``
    Fixed-step linearly implicit Euler for ``u' = -A u + N(u, t)`` with
    ``A`` a sparse matrix: ``(I + h A) u_new = u + h N(u, t)``.
``imex_ars222``
    Second-order, L-stable two-stage IMEX Runge-Kutta scheme of Ascher,
    Ruuth and Spiteri for the same splitting.  More accurate than
    ``imex_euler`` but not positivity preserving.

All steppers accept states of shape ``(..., d)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

# continuous extension: y(t + th*h) = y + h * sum_i k_i * (P[i] @ [th, th^2, th^3, th^4])
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

METHODS = ("dopri5", "etdrk4", "imex_euler", "imex_ars222")
ADAPTIVE = ("dopri5",)


def dopri5_step(rhs, t, y, h, k1=None):
    """One Dormand-Prince step.

    Returns ``(y_new, err, ks)`` where ``err`` is the raw embedded error
    estimate (same shape as ``y``) and ``ks`` the seven stage derivatives;
    ``ks[-1]`` is the FSAL derivative at the new point.
    """
    ks = [rhs(y, t) if k1 is None else k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
        ks.append(rhs(yi, t + _C[i] * h))
    y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y_new, err, ks


def dopri5_dense(y, h, ks, theta):
    """Fourth-order interpolant at fraction ``theta`` of the step."""
    w = _P @ np.array([theta, theta**2, theta**3, theta**4])
    return y + h * sum(wi * k for wi, k in zip(w, ks) if wi != 0.0)


def error_norm(err, y, y_new, abs_tol, rel_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = err / scale
        val = float(np.sqrt(np.mean(ratio * ratio)))
    return val if np.isfinite(val) else np.inf


def initial_step(rhs, t, y, abs_tol, rel_tol, h_max):
    """Hairer-Norsett-Wanner starting step heuristic."""
    f0 = rhs(y, t)
    scale = abs_tol + rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    f1 = rhs(y + h0 * f0, t + h0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    h = min(100 * h0, h1, h_max)
    return h if np.isfinite(h) and h > 0 else min(1e-6, h_max)


def _etd_coefficients(diag: np.ndarray, h: float, n_contour: int = 32):
    c = -np.asarray(diag, dtype=float) * h
    r = np.exp(1j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    lr = c[:, None] + r[None, :]
    e_lr = np.exp(lr)
    q = h * np.mean(((np.exp(lr / 2) - 1) / lr).real, axis=1)
    f1 = h * np.mean(((-4 - lr + e_lr * (4 - 3 * lr + lr**2)) / lr**3).real, axis=1)
    f2 = h * np.mean(((2 + lr + e_lr * (-2 + lr)) / lr**3).real, axis=1)
    f3 = h * np.mean(((-4 - 3 * lr - lr**2 + e_lr * (4 - lr)) / lr**3).real, axis=1)
    return np.exp(c), np.exp(c / 2), q, f1, f2, f3


@lru_cache(maxsize=64)
def _etd_cached(diag_bytes: bytes, h: float):
    return _etd_coefficients(np.frombuffer(diag_bytes, dtype=float), h)


def etdrk4_step(diag, nonlinear, t, y, h):
    e, e2, q, f1, f2, f3 = _etd_cached(np.ascontiguousarray(diag, float).tobytes(), float(h))
    nu = nonlinear(y, t)
    a = e2 * y + q * nu
    na = nonlinear(a, t + h / 2)
    b = e2 * y + q * na
    nb = nonlinear(b, t + h / 2)
    c = e2 * a + q * (2 * nb - nu)
    nc = nonlinear(c, t + h)
    return e * y + f1 * nu + 2 * f2 * (na + nb) + f3 * nc


def _imex_solver(op, h: float, cache: dict):
    solver = cache.get(float(h))
    if solver is None:
        n = op.shape[0]
        m = (sp.identity(n, format="csc") + h * sp.csc_matrix(op)).tocsc()
        solver = spla.splu(m)
        if len(cache) > 64:
            cache.clear()
        cache[float(h)] = solver
    return solver


def imex_euler_step(op, nonlinear, t, y, h, cache=None):
    solver = _imex_solver(op, h, {} if cache is None else cache)
    return _solve(solver, y + h * nonlinear(y, t))


_ARS_G = 1 - 1 / np.sqrt(2)
_ARS_D = 1 - 1 / (2 * _ARS_G)


def _solve(solver, rhs):
    if rhs.ndim == 1:
        return solver.solve(rhs)
    flat = rhs.reshape(-1, rhs.shape[-1])
    return solver.solve(np.ascontiguousarray(flat.T)).T.reshape(rhs.shape)


def _apply(op, y):
    if y.ndim == 1:
        return op @ y
    flat = y.reshape(-1, y.shape[-1])
    return (op @ flat.T).T.reshape(y.shape)


def imex_ars222_step(op, nonlinear, t, y, h, cache=None):
    g, d = _ARS_G, _ARS_D
    solver = _imex_solver(op, g * h, {} if cache is None else cache)
    n1 = nonlinear(y, t)
    u2 = _solve(solver, y + g * h * n1)
    n2 = nonlinear(u2, t + g * h)
    rhs = y - h * (1 - g) * _apply(op, u2) + h * (d * n1 + (1 - d) * n2)
    return _solve(solver, rhs)


def fixed_step(model, t, y, h):
    """Dispatch one step of a fixed-step scheme for ``model``."""
    if model.method == "etdrk4":
        return etdrk4_step(model.linear, model.nonlinear, t, y, h)
    if model.method == "imex_euler":
        return imex_euler_step(model.linear, model.nonlinear, t, y, h, model._cache)
    if model.method == "imex_ars222":
        return imex_ars222_step(model.linear, model.nonlinear, t, y, h, model._cache)
    raise ValueError(f"{model.method!r} is not a fixed-step method")
