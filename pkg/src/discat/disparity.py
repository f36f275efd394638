"""Truncated disparity function, its weight function and Pearson residuals.

All functions accept scalars or numpy arrays and return the same shape
(a Python float for scalar input). ``c = math.inf`` gives the
maximum-likelihood limit.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import AtKink, InvalidParameter, NegativeResidual, ZeroModelProbability

DEFAULT_C = 1.6


def check_c(c: float) -> float:
    c = float(c)
    if math.isnan(c) or c < 1.0:
        raise InvalidParameter(f"tuning constant must satisfy c >= 1, got {c}")
    return c


def _prep(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise NegativeResidual("Pearson residuals must be nonnegative")
    return arr


def _out(arr, scalar):
    return float(arr) if scalar else arr


def rho(x, c: float = DEFAULT_C):
    """Disparity ``x log x`` below ``c``, continued linearly above it.

    Above ``c`` the function is the tangent line of ``x log x`` at ``c``,
    ``x (log c + 1) - c``, which keeps it convex and continuously
    differentiable. ``rho(0) = 0``.
    """
    c = check_c(c)
    scalar = np.ndim(x) == 0
    x = _prep(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    if math.isinf(c):
        return _out(xlogx, scalar)
    lin = x * (math.log(c) + 1.0) - c
    return _out(np.where(x <= c, xlogx, lin), scalar)


def rho_prime(x, c: float = DEFAULT_C):
    """Derivative ``log x + 1`` below ``c`` and the constant ``log c + 1`` above."""
    c = check_c(c)
    scalar = np.ndim(x) == 0
    x = _prep(x)
    with np.errstate(divide="ignore"):
        d = np.log(np.minimum(x, c)) + 1.0
    return _out(d, scalar)


def weight(x, c: float = DEFAULT_C):
    """``1`` on ``[0, c]`` and ``c / x`` above."""
    c = check_c(c)
    scalar = np.ndim(x) == 0
    x = _prep(x)
    if math.isinf(c):
        return _out(np.ones_like(x), scalar)
    with np.errstate(divide="ignore"):
        w = np.where(x <= c, 1.0, c / np.where(x > 0, x, 1.0))
    return _out(w, scalar)


def weight_prime(x, c: float = DEFAULT_C):
    """``0`` below ``c`` and ``-c / x**2`` above; undefined at ``x = c``."""
    c = check_c(c)
    scalar = np.ndim(x) == 0
    x = _prep(x)
    if math.isinf(c):
        return _out(np.zeros_like(x), scalar)
    if np.any(x == c):
        raise AtKink(f"weight derivative undefined at x = c = {c}")
    with np.errstate(divide="ignore"):
        wp = np.where(x < c, 0.0, -c / np.where(x > 0, x, 1.0) ** 2)
    return _out(wp, scalar)


def pearson_residual(fhat, p):
    """Ratio of empirical to model probability, ``fhat / p``."""
    scalar = np.ndim(fhat) == 0 and np.ndim(p) == 0
    f = np.asarray(fhat, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ZeroModelProbability("model probability must be positive")
    if np.any(f < 0):
        raise NegativeResidual("empirical frequency must be nonnegative")
    return _out(f / p, scalar)
