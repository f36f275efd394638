"""Correlation matrices from pairwise polychoric fits, one-factor analysis
and scale reliability."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DegenerateMargin,
    InvalidParameter,
    NonConvergence,
)
from .estimator import FitConfig, fit, pearson_sample_corr
from .models.polychoric import PolychoricModel
from .parallel import pmap
from .tables import ContingencyTable

METHODS = ("robust", "mle", "pearson")
PSD_TRIGGER = -1e-8
HEYWOOD_FLOOR = 0.005
NONINFORMATIVE_LOADING = 0.05


@dataclass
class PolyMatrix:
    R: np.ndarray
    method: str
    c: float | None = None
    converged: np.ndarray | None = None  # q x q, True where the pairwise fit converged
    fallback: list = field(default_factory=list)  # pairs that fell back to Pearson
    psd_corrected: bool = False
    min_eigenvalue_before: float | None = None
    names: list | None = None

    @property
    def q(self) -> int:
        return self.R.shape[0]

    @classmethod
    def from_matrix(cls, R, names=None) -> "PolyMatrix":
        R = np.asarray(R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise InvalidParameter("correlation matrix must be square")
        if not np.allclose(R, R.T, atol=1e-10):
            raise InvalidParameter("correlation matrix must be symmetric")
        if not np.allclose(np.diag(R), 1.0, atol=1e-10):
            raise InvalidParameter("correlation matrix must have unit diagonal")
        return cls(R=R.copy(), method="given", names=names)


def reverse_codes(data: np.ndarray, columns, levels) -> np.ndarray:
    """Reverse-code the given columns: ``code -> J + 1 - code``."""
    out = np.array(data, dtype=np.int64, copy=True)
    for j in columns:
        out[:, j] = int(levels[j]) + 1 - out[:, j]
    return out


def _pair_estimate(args, method: str, c: float):
    x, y, jx, jy = args
    if method == "pearson":
        return pearson_sample_corr(np.column_stack([x, y])), True
    table = ContingencyTable.from_codes(np.column_stack([x, y]), (jx, jy))
    cfg = FitConfig(c=c if method == "robust" else math.inf)
    try:
        res = fit(PolychoricModel(jx, jy), table, cfg)
    except NonConvergence:
        return pearson_sample_corr(np.column_stack([x, y])), False
    return float(res.theta[0]), True


def poly_matrix(
    data,
    method: str = "robust",
    c: float = 1.6,
    levels=None,
    psd_correct: bool = True,
    threads: int | None = 1,
    names=None,
) -> PolyMatrix:
    """Pairwise correlation matrix of ``q`` ordinal items.

    ``data`` is an ``(N, q)`` array of 1-based codes. Pairs whose fit does
    not converge fall back to the Pearson correlation of the codes and are
    listed in ``fallback``.
    """
    if method not in METHODS:
        raise InvalidParameter(f"method must be one of {METHODS}")
    data = np.asarray(data, dtype=np.int64)
    if data.ndim != 2 or data.shape[1] < 2:
        raise InvalidParameter("need at least two items")
    q = data.shape[1]
    if levels is None:
        levels = data.max(axis=0)
    levels = [int(j) for j in levels]
    for j in range(q):
        if len(np.unique(data[:, j])) < 2:
            raise DegenerateMargin(f"item {j + 1} has fewer than two observed categories")
    pairs = [(i, j) for i in range(q) for j in range(i + 1, q)]
    jobs = [(data[:, i], data[:, j], levels[i], levels[j]) for i, j in pairs]
    results = pmap(partial(_pair_estimate, method=method, c=c), jobs, threads)

    R = np.eye(q)
    conv = np.ones((q, q), dtype=bool)
    fallback = []
    for (i, j), (r, ok) in zip(pairs, results):
        R[i, j] = R[j, i] = r
        conv[i, j] = conv[j, i] = ok
        if not ok:
            fallback.append((i, j))
    if fallback:
        warnings.warn(f"{len(fallback)} pair(s) fell back to Pearson correlation", RuntimeWarning, stacklevel=2)
    min_eig = float(np.linalg.eigvalsh(R).min())
    corrected = False
    if psd_correct and min_eig < PSD_TRIGGER:
        R = nearest_psd(R)
        corrected = True
    return PolyMatrix(
        R=R,
        method=method,
        c=c if method == "robust" else (math.inf if method == "mle" else None),
        converged=conv,
        fallback=fallback,
        psd_corrected=corrected,
        min_eigenvalue_before=min_eig,
        names=names,
    )


def _clip_psd(A: np.ndarray, floor: float = 0.0) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return (V * np.maximum(w, floor)) @ V.T


def nearest_psd(R, tol: float = 1e-7, max_iter: int = 200) -> np.ndarray:
    """Nearest correlation matrix by alternating projections with Dykstra's correction.

    Returns the input unchanged when it is already positive semidefinite.
    """
    R = np.asarray(R, dtype=float)
    if np.linalg.eigvalsh(R).min() >= 0:
        return R.copy()
    Y = R.copy()
    dS = np.zeros_like(R)
    for _ in range(max_iter):
        Rk = Y - dS
        X = _clip_psd(Rk)
        dS = X - Rk
        Y_new = X.copy()
        np.fill_diagonal(Y_new, 1.0)
        done = np.linalg.norm(Y_new - Y, "fro") / np.linalg.norm(Y_new, "fro") < tol
        Y = Y_new
        if done:
            break
    else:
        raise NonConvergence(f"nearest PSD projection did not converge in {max_iter} sweeps")
    # final cleanup: clip residual negative eigenvalues, then rescale to unit diagonal
    X = _clip_psd(Y)
    d = np.sqrt(np.diag(X))
    X = X / np.outer(d, d)
    X = 0.5 * (X + X.T)
    np.fill_diagonal(X, 1.0)
    return X


@dataclass
class FactorFit:
    loadings: np.ndarray  # (q, 1)
    uniquenesses: np.ndarray
    proportion_variance: float
    converged: bool
    objective: float
    heywood: list = field(default_factory=list)  # items whose uniqueness hit the floor
    non_informative: bool = False


def _discrepancy(lam, R):
    S = np.outer(lam, lam) + np.diag(1.0 - lam * lam)
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        return math.inf, np.zeros_like(lam)
    Si = np.linalg.inv(S)
    F = logdet + float(np.trace(R @ Si))
    G = Si - Si @ R @ Si
    grad = 2.0 * (G @ lam) - 2.0 * lam * np.diag(G)
    return F, grad


def factor_fit(R, r: int = 1) -> FactorFit:
    """One-factor maximum likelihood fit on the correlation scale.

    Minimizes ``log|S| + tr(R S^-1)`` with ``S = l l' + diag(1 - l**2)``,
    so the model diagonal is exactly one. Loadings are bounded so that no
    uniqueness drops below the Heywood floor.
    """
    if isinstance(R, PolyMatrix):
        R = R.R
    R = np.asarray(R, dtype=float)
    q = R.shape[0]
    if r != 1:
        raise InvalidParameter("only one-factor models are supported")
    if q <= r:
        raise InvalidParameter("need more items than factors")
    if np.linalg.eigvalsh(R).min() <= 0:
        raise InvalidParameter("correlation matrix must be positive definite")
    smc = 1.0 - 1.0 / np.diag(np.linalg.inv(R))
    lam0 = np.sqrt(np.clip(smc, 0.01, 0.95))
    bound = math.sqrt(1.0 - HEYWOOD_FLOOR)
    res = minimize(
        _discrepancy,
        lam0,
        args=(R,),
        jac=True,
        method="L-BFGS-B",
        bounds=[(-bound, bound)] * q,
        options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10},
    )
    lam = res.x.copy()
    if lam.sum() < 0:
        lam = -lam
    psi = 1.0 - lam * lam
    heywood = [int(j) for j in np.flatnonzero(psi <= HEYWOOD_FLOOR + 1e-9)]
    if heywood:
        warnings.warn(f"Heywood case: uniqueness at floor for items {heywood}", RuntimeWarning, stacklevel=2)
    return FactorFit(
        loadings=lam[:, None],
        uniquenesses=psi,
        proportion_variance=float(np.sum(lam * lam) / q),
        converged=bool(res.success),
        objective=float(res.fun),
        heywood=heywood,
        non_informative=bool(np.max(np.abs(lam)) < NONINFORMATIVE_LOADING),
    )


def cronbach_alpha(R) -> float:
    """Standardized alpha ``q r / (1 + (q - 1) r)`` with ``r`` the mean off-diagonal correlation."""
    if isinstance(R, PolyMatrix):
        R = R.R
    R = np.asarray(R, dtype=float)
    q = R.shape[0]
    if q < 2:
        raise InvalidParameter("need at least two items")
    rbar = (R.sum() - np.trace(R)) / (q * (q - 1))
    return float(q * rbar / (1.0 + (q - 1) * rbar))
