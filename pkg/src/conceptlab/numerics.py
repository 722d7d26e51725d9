"""Gradients, finite-difference oracles, and damped dense inversion."""

from __future__ import annotations

import numpy as np

from .autodiff import value_and_grad, value_of, Var
from .errors import NumericFailure
from .params import ParamVector

MAX_HESSIAN_DIM = 256


def gradient(loss_fn, params: ParamVector) -> ParamVector:
    """Reverse-mode gradient of a scalar loss with respect to params."""
    _, g = value_and_grad(loss_fn, params.values)
    return params.with_values(g)


def _eval_loss(loss_fn, x: np.ndarray) -> float:
    out = loss_fn(Var(x))
    val = float(value_of(out))
    if not np.isfinite(val):
        raise NumericFailure(f"loss evaluated to non-finite value {val}")
    return val


def finite_diff_gradient(loss_fn, params: ParamVector, h: float | None = None) -> ParamVector:
    """Central-difference gradient oracle.

    With h=None the stencil is scale-aware: h_i = 1e-5 * max(1, |x_i|).
    """
    x = params.values
    if h is not None and h <= 0:
        raise ValueError("h must be positive")
    steps = np.full_like(x, h) if h is not None else 1e-5 * np.maximum(1.0, np.abs(x))
    g = np.zeros_like(x)
    for i in range(x.size):
        hi = steps[i]
        xp = x.copy()
        xp[i] += hi
        xm = x.copy()
        xm[i] -= hi
        g[i] = (_eval_loss(loss_fn, xp) - _eval_loss(loss_fn, xm)) / (2.0 * hi)
    return params.with_values(g)


def finite_diff_hessian(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Hessian of a scalar function, symmetrized on return.

    f takes a plain 1-D ndarray. Guarded to dim <= 256 since the stencil
    costs O(d^2) evaluations.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    if d > MAX_HESSIAN_DIM:
        raise ValueError(f"dimension {d} exceeds Hessian guard {MAX_HESSIAN_DIM}")
    hess = np.zeros((d, d))
    f0 = float(f(x))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        hess[i, i] = (float(f(x + ei)) - 2.0 * f0 + float(f(x - ei))) / (h * h)
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h
            val = (
                float(f(x + ei + ej))
                - float(f(x + ei - ej))
                - float(f(x - ei + ej))
                + float(f(x - ei - ej))
            ) / (4.0 * h * h)
            hess[i, j] = val
            hess[j, i] = val
    if not np.all(np.isfinite(hess)):
        raise NumericFailure("non-finite entries in finite-difference Hessian")
    return 0.5 * (hess + hess.T)


def damped_inverse(m: np.ndarray, damping: float) -> np.ndarray:
    """Dense inverse of (m + damping*I) with a residual check.

    Raises NumericFailure with a condition estimate when the damped system
    is still numerically singular or the residual exceeds 1e-8 in max norm.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if damping < 0:
        raise ValueError("damping must be >= 0")
    a = m + damping * np.eye(m.shape[0])
    try:
        inv = np.linalg.solve(a, np.eye(m.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(
            f"damped system is singular: {exc}", condition=_cond_estimate(a)
        ) from exc
    residual = np.max(np.abs(a @ inv - np.eye(m.shape[0])))
    if not np.isfinite(residual) or residual > 1e-8:
        raise NumericFailure(
            f"damped inverse residual {residual:.3e} exceeds 1e-8",
            condition=_cond_estimate(a),
        )
    return inv


def _cond_estimate(a: np.ndarray) -> float:
    try:
        return float(np.linalg.cond(a))
    except np.linalg.LinAlgError:
        return float("inf")
