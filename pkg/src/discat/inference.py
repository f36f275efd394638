"""Sandwich covariance, confidence intervals, cellwise misfit tests and the
influence function of the minimum disparity estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from . import disparity
from .errors import AtKink, InvalidParameter, SingularInformation, SingularM, ZeroVariance
from .estimator import KINK_TOL, FitResult, prepare
from .models.base import CategoricalModel, log_hessians, scores

MAX_CONDITION = 1e12


@dataclass
class CovarianceReport:
    """``Sigma = M^-1 U M^-1``; standard errors are ``sqrt(diag(Sigma) / n)``.

    ``Sigma`` is computed directly in natural parameters. At a stationary
    point of the loss this equals transporting the internal-coordinate
    covariance by the delta method, so no Jacobian is applied
    (``jacobian_applied`` is False).
    """

    Sigma: np.ndarray
    U: np.ndarray
    M: np.ndarray
    se: np.ndarray
    n: float
    condition: float
    param_names: list
    jacobian_applied: bool = False


@dataclass
class CellTestReport:
    outcomes: list
    statistic: np.ndarray
    variance: np.ndarray
    raw_p: np.ndarray
    adjusted_p: np.ndarray
    reject: np.ndarray
    alpha: float
    adjust: str
    m: int
    excluded: list  # cells with zero observed frequency, not tested

    def rejected(self) -> list:
        return [z for z, r in zip(self.outcomes, self.reject) if r]


def _sym_inverse(A: np.ndarray, exc, what: str) -> tuple[np.ndarray, float]:
    A = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(A)
    aw = np.abs(w)
    cond = float(aw.max() / aw.min()) if aw.min() > 0 else math.inf
    if not cond <= MAX_CONDITION:
        raise exc(f"{what} is singular or ill-conditioned (condition {cond:.3g})")
    return (V / w) @ V.T, cond


def sandwich_parts(model: CategoricalModel, theta, freqs: np.ndarray, c: float):
    """Return ``(U, M)`` at ``theta`` for active-cell frequencies ``freqs``."""
    ev = model.evaluate(np.asarray(theta, float), need_hessian=True)
    s = scores(ev)
    Q = log_hessians(ev)
    f = np.asarray(freqs, float)
    x = f / ev.probs
    if math.isfinite(c) and np.any(np.abs(x - c) < KINK_TOL):
        raise AtKink("a Pearson residual is within 1e-8 of the tuning constant")
    w = disparity.weight(x, c)
    wp = disparity.weight_prime(x, c)
    ind = (x <= c).astype(float)
    W = (s * ind[:, None]).T
    Wf = W @ f
    U = (W * f) @ W.T - np.outer(Wf, Wf)
    M = np.einsum("z,zi,zj->ij", f * wp * x, s, s) - np.einsum("z,zij->ij", f * w, Q)
    return 0.5 * (U + U.T), 0.5 * (M + M.T)


def plugin_covariance(model: CategoricalModel, theta_hat, table, c: float = disparity.DEFAULT_C) -> CovarianceReport:
    """Plug-in asymptotic covariance at a fitted parameter."""
    c = disparity.check_c(c)
    data = prepare(model, table)
    U, M = sandwich_parts(data.model, theta_hat, data.freqs, c)
    Minv, cond = _sym_inverse(M, SingularM, "M")
    Sigma = Minv @ U @ Minv
    Sigma = 0.5 * (Sigma + Sigma.T)
    se = np.sqrt(np.clip(np.diag(Sigma), 0.0, None) / data.n)
    return CovarianceReport(Sigma, U, M, se, data.n, cond, list(data.model.param_names))


def covariance_from_fit(result: FitResult) -> CovarianceReport:
    U, M = sandwich_parts(result.model, result.theta, result.freqs, result.c)
    Minv, cond = _sym_inverse(M, SingularM, "M")
    Sigma = Minv @ U @ Minv
    Sigma = 0.5 * (Sigma + Sigma.T)
    se = np.sqrt(np.clip(np.diag(Sigma), 0.0, None) / result.n)
    return CovarianceReport(Sigma, U, M, se, result.n, cond, list(result.model.param_names))


def confidence_interval(estimate: float, se: float, alpha: float = 0.05) -> tuple[float, float]:
    """Symmetric normal-quantile interval ``estimate -/+ q_{1-alpha/2} se``."""
    if se < 0:
        raise InvalidParameter("standard error must be nonnegative")
    if not 0 < alpha < 1:
        raise InvalidParameter("alpha must lie in (0, 1)")
    q = float(ndtri(1.0 - alpha / 2.0))
    return (estimate - q * se, estimate + q * se)


def bh_adjust(p) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj_sorted
    return out


def cell_test(
    model: CategoricalModel,
    theta_hat,
    table,
    cov: CovarianceReport,
    alpha: float = 0.001,
    adjust: str = "bh",
) -> CellTestReport:
    """One-sided test of each observed cell for excess empirical mass.

    The statistic is ``(p_z - f_z) / sqrt(g_z' Sigma g_z / n)``; small
    lower-tail p-values flag cells the model under-predicts. Cells with no
    observations are not tested.
    """
    if adjust not in ("bh", "none"):
        raise InvalidParameter("adjust must be 'bh' or 'none'")
    data = prepare(model, table)
    m_ = data.model
    p, G = m_.probs_and_grad(np.asarray(theta_hat, float))
    f = data.freqs
    outcomes = m_.outcomes()
    tested = np.flatnonzero(f > 0)
    var = np.einsum("zi,ij,zj->z", G[tested], cov.Sigma, G[tested])
    if np.any(~(var > 1e-300)):
        bad = outcomes[tested[np.argmax(~(var > 1e-300))]]
        raise ZeroVariance(f"test statistic variance vanishes at cell {bad}")
    T = (p[tested] - f[tested]) / np.sqrt(var / data.n)
    raw = ndtr(T)
    adj = bh_adjust(raw) if adjust == "bh" else raw.copy()
    return CellTestReport(
        outcomes=[outcomes[i] for i in tested],
        statistic=T,
        variance=var,
        raw_p=raw,
        adjusted_p=adj,
        reject=adj <= alpha,
        alpha=alpha,
        adjust=adjust,
        m=len(tested),
        excluded=[outcomes[i] for i in np.flatnonzero(f == 0)],
    )


def fisher_information(model: CategoricalModel, theta) -> np.ndarray:
    """``sum_z p_z s_z s_z'`` at ``theta``."""
    p, G = model.probs_and_grad(np.asarray(theta, float))
    s = G / p[:, None]
    return (s * p[:, None]).T @ s


def influence_function(model: CategoricalModel, theta_star, z, c: float = disparity.DEFAULT_C) -> np.ndarray:
    """Closed-form influence of a point mass at cell ``z`` on the estimator.

    For ``c == 1`` the formula assumes ``z`` is the only cell whose residual
    rises above one along the contamination path. When some other cell has
    ``s_y' IF < -1`` that cell is downweighted too and the true derivative differs.
    """
    c = disparity.check_c(c)
    theta_star = np.asarray(theta_star, float)
    p, G = model.probs_and_grad(theta_star)
    i = model.index().get(tuple(z))
    if i is None:
        raise InvalidParameter(f"outcome {tuple(z)} is not in the model's sample space")
    s = G / p[:, None]
    J = (s * p[:, None]).T @ s
    if c > 1.0:
        Jinv, _ = _sym_inverse(J, SingularInformation, "Fisher information")
        return Jinv @ s[i]
    A = J - p[i] * np.outer(s[i], s[i])
    Ainv, _ = _sym_inverse(A, SingularInformation, "J - p s s'")
    return Ainv @ (s[i] * p[i])
