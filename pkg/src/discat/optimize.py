"""Unconstrained quasi-Newton minimization.

BFGS on the inverse Hessian with a backtracking Armijo line search that
uses quadratic, then cubic, interpolation. Points where the objective is
undefined are reported as ``inf`` by the caller and simply shrink the step.
A short Newton polish with a finite-difference Hessian of the gradient
tightens the solution when BFGS stalls on the step tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ARMIJO = 1e-4
MAX_BACKTRACK = 40


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    converged: bool
    iterations: int
    message: str
    history: list = field(default_factory=list)  # loss after each accepted line-search step


def _line_search(fg, x, f, g, p):
    slope = float(g @ p)
    if slope >= 0:
        return None
    a, a_prev, f_prev = 1.0, None, None
    for _ in range(MAX_BACKTRACK):
        xn = x + a * p
        fn, gn = fg(xn)
        if math.isfinite(fn) and fn <= f + ARMIJO * a * slope:
            return a, xn, fn, gn
        if not math.isfinite(fn):
            a_new = 0.1 * a
        elif a_prev is None:
            a_new = -slope * a * a / (2.0 * (fn - f - slope * a))
        else:
            r1 = fn - f - a * slope
            r2 = f_prev - f - a_prev * slope
            denom = a - a_prev
            c3 = (r1 / a**2 - r2 / a_prev**2) / denom
            c2 = (-a_prev * r1 / a**2 + a * r2 / a_prev**2) / denom
            if c3 == 0:
                a_new = -slope / (2.0 * c2) if c2 != 0 else 0.5 * a
            else:
                disc = c2 * c2 - 3.0 * c3 * slope
                a_new = (-c2 + math.sqrt(disc)) / (3.0 * c3) if disc >= 0 else 0.5 * a
        if not math.isfinite(a_new):
            a_new = 0.5 * a
        a_prev, f_prev = a, fn
        a = min(max(a_new, 0.1 * a), 0.5 * a)
    return None


def _fd_hessian(fg, x, g):
    d = len(x)
    H = np.empty((d, d))
    for j in range(d):
        h = 1e-5 * max(1.0, abs(x[j]))
        e = np.zeros(d)
        e[j] = h
        fp, gp = fg(x + e)
        fm, gm = fg(x - e)
        if gp is None or gm is None:
            return None
        H[:, j] = (gp - gm) / (2.0 * h)
    return 0.5 * (H + H.T)


def _newton_polish(fg, x, f, g, gtol, steps=6):
    for _ in range(steps):
        if np.max(np.abs(g)) <= gtol:
            break
        H = _fd_hessian(fg, x, g)
        if H is None:
            break
        try:
            w = np.linalg.eigvalsh(H)
            if w.min() <= 0:
                break
            p = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        xn = x + p
        fn, gn = fg(xn)
        if gn is None or not math.isfinite(fn) or fn > f + 1e-12 * max(1.0, abs(f)):
            break
        if np.max(np.abs(gn)) >= np.max(np.abs(g)):
            break
        x, f, g = xn, fn, gn
    return x, f, g


def bfgs(
    fg: Callable[[np.ndarray], tuple],
    x0: np.ndarray,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    max_iter: int = 500,
) -> OptResult:
    """Minimize ``fg`` (returning ``(f, grad)``) from ``x0``."""
    x = np.asarray(x0, dtype=float).copy()
    f, g = fg(x)
    if not math.isfinite(f):
        return OptResult(x, f, np.full_like(x, np.nan), False, 0, "infeasible start")
    history = [f]
    H = np.eye(len(x))
    first = True
    msg = "iteration limit reached"
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= gtol:
            msg = "gradient tolerance reached"
            it -= 1
            break
        p = -H @ g
        ls = _line_search(fg, x, f, g, p)
        if ls is None:
            # restart along steepest descent once before giving up
            H = np.eye(len(x))
            first = True
            ls = _line_search(fg, x, f, g, -g)
            if ls is None:
                msg = "line search failed"
                break
            a, xn, fn, gn = ls
            s = xn - x
        else:
            a, xn, fn, gn = ls
            s = xn - x
        y = gn - g
        sy = float(s @ y)
        x, f, g = xn, fn, gn
        history.append(f)
        if np.max(np.abs(s)) <= xtol * (1.0 + np.max(np.abs(x))):
            msg = "step tolerance reached"
            break
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                H = np.eye(len(x)) * (sy / float(y @ y))
                first = False
            rho = 1.0 / sy
            Hy = H @ y
            H = H + ((sy + y @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
    if np.max(np.abs(g)) > gtol:
        x, f, g = _newton_polish(fg, x, f, g, gtol)
    converged = bool(np.max(np.abs(g)) <= gtol)
    if converged and msg != "gradient tolerance reached":
        msg = msg + "; gradient tolerance reached after polish"
    return OptResult(x, f, g, converged, it, msg, history)
