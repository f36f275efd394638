"""Minimum disparity estimation.

The loss is ``sum_z rho(f_z / p_z) p_z`` over the model's active cells,
where ``f`` are empirical relative frequencies. ``c = inf`` turns it into
the Kullback-Leibler divergence from the data, so the minimizer is the
maximum likelihood estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import disparity
from .errors import (
    AtKink,
    DegenerateProbability,
    EmptyTable,
    InsufficientCells,
    InvalidParameter,
    NonConvergence,
    ZeroVariance,
)
from .models.base import CategoricalModel, log_hessians
from .optimize import bfgs
from .tables import ContingencyTable

KINK_TOL = 1e-8
NEAR_KINK = 1e-4  # relative distance to c that triggers the semismooth refinement


@dataclass
class FitConfig:
    c: float = disparity.DEFAULT_C
    max_iter: int = 500
    gtol: float = 1e-8
    xtol: float = 1e-10
    n_starts: int = 1
    seed: int = 0

    def __post_init__(self):
        self.c = disparity.check_c(self.c)
        if self.gtol <= 0 or self.xtol <= 0:
            raise InvalidParameter("tolerances must be positive")
        if self.max_iter < 1 or self.n_starts < 1:
            raise InvalidParameter("max_iter and n_starts must be at least 1")


@dataclass
class FitResult:
    model: CategoricalModel
    theta: np.ndarray
    loss: float
    grad_norm: float
    converged: bool
    iterations: int
    message: str
    probs: np.ndarray
    freqs: np.ndarray
    n: float
    c: float
    residuals: np.ndarray
    outcomes: list
    downweighted: list
    at_kink: bool
    loss_history: list = field(default_factory=list)

    def residual(self, z) -> float:
        return float(self.residuals[self.model.index()[tuple(z)]])

    def params(self) -> dict:
        return dict(zip(self.model.param_names, map(float, self.theta)))


@dataclass
class Data:
    """Model bound to data plus active-cell frequencies."""

    model: CategoricalModel
    freqs: np.ndarray
    n: float


def prepare(model: CategoricalModel, table) -> Data:
    """Bind ``model`` to a table (or a dense frequency array).

    ``table`` may be a :class:`ContingencyTable` or an array of counts or
    relative frequencies over the full sample space. Arrays are treated as
    population tables, so ``n`` is their sum.
    """
    if isinstance(table, ContingencyTable):
        full = table.counts.astype(float).ravel()
        if table.levels != tuple(model.levels):
            raise InvalidParameter(f"table levels {table.levels} do not match model levels {model.levels}")
    else:
        full = np.asarray(table, dtype=float).ravel()
        if full.size != int(np.prod(model.levels)):
            raise InvalidParameter("frequency array does not match the model's sample space")
        if np.any(full < 0):
            raise InvalidParameter("frequencies must be nonnegative")
    if full.sum() <= 0:
        raise EmptyTable("table has no observations")
    bound = model.bind(full)
    f = full[bound.mask]
    n = float(f.sum())
    if n <= 0:
        raise EmptyTable("no observations in the model's active cells")
    return Data(bound, f / n, n)


def _loss_grad(model, theta, f, c, want_grad=True):
    p, G = model.probs_and_grad(theta)
    x = f / p
    L = float(np.sum(p * disparity.rho(x, c)))
    if not want_grad:
        return L, None, x
    w = disparity.weight(x, c)
    return L, -(G.T @ (f * w / p)), x


def loss(model: CategoricalModel, theta, table, c: float = disparity.DEFAULT_C) -> float:
    """Disparity loss at ``theta``."""
    data = prepare(model, table)
    return _loss_grad(data.model, np.asarray(theta, float), data.freqs, disparity.check_c(c), False)[0]


def loss_gradient(
    model: CategoricalModel, theta, table, c: float = disparity.DEFAULT_C, strict: bool = True
) -> np.ndarray:
    """Gradient ``-sum_z s_z f_z w(f_z / p_z)`` of the loss in natural parameters.

    With ``strict`` a residual exactly equal to ``c`` raises :class:`AtKink`.
    """
    c = disparity.check_c(c)
    data = prepare(model, table)
    _, g, x = _loss_grad(data.model, np.asarray(theta, float), data.freqs, c)
    if strict and np.any(x == c):
        raise AtKink("a Pearson residual equals the tuning constant")
    return g


def _objective(model, f, c):
    def fg(eta):
        try:
            theta = model.to_natural(eta)
            L, g, _ = _loss_grad(model, theta, f, c)
        except (DegenerateProbability, InvalidParameter, OverflowError, FloatingPointError):
            return math.inf, None
        if not (math.isfinite(L) and np.all(np.isfinite(g))):
            return math.inf, None
        return L, model.natural_jacobian(eta).T @ g

    return fg


def _stationarity(model, theta, f, c):
    """Loss gradient and its generalized Jacobian, with ``w'`` taken on each cell's side of ``c``."""
    ev = model.evaluate(theta, need_hessian=True)
    x = f / ev.probs
    s = ev.grads / ev.probs[:, None]
    w = disparity.weight(x, c)
    wp = -c / np.maximum(x, c) ** 2 * (x > c)
    g = -(s.T @ (f * w))
    M = np.einsum("z,zi,zj->ij", f * wp * x, s, s) - np.einsum("z,zij->ij", f * w, log_hessians(ev))
    return g, M


def _semismooth_refine(model, theta, f, c, steps=8):
    """Newton steps on the stationarity equation when residuals sit near the kink.

    BFGS assumes one smooth curvature and crawls when the loss bends
    differently on either side of the optimum.
    """
    try:
        g, M = _stationarity(model, theta, f, c)
        L = _loss_grad(model, theta, f, c, False)[0]
    except (DegenerateProbability, InvalidParameter):
        return theta
    for _ in range(steps):
        try:
            step = np.linalg.solve(M, g)
        except np.linalg.LinAlgError:
            break
        cand = theta - step
        try:
            gn, Mn = _stationarity(model, cand, f, c)
            Ln = _loss_grad(model, cand, f, c, False)[0]
        except (DegenerateProbability, InvalidParameter):
            break
        if np.linalg.norm(gn) >= np.linalg.norm(g) or Ln > L + 1e-14 * max(1.0, abs(L)):
            break
        theta, g, M, L = cand, gn, Mn, Ln
        if np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(theta))):
            break
    return theta


def fit(model: CategoricalModel, table, config: FitConfig | None = None, theta0=None) -> FitResult:
    """Minimize the disparity loss.

    Raises :class:`NonConvergence` (with the best attempt on ``.result``)
    when no start reaches the gradient tolerance.
    """
    config = config or FitConfig()
    c = config.c
    data = prepare(model, table)
    m, f = data.model, data.freqs
    populated = int(np.count_nonzero(f))
    if populated < 2:
        raise InsufficientCells("fewer than two populated cells")
    if populated <= m.n_params:
        warnings.warn(
            f"only {populated} populated cells for {m.n_params} parameters; estimate may not be identified",
            RuntimeWarning,
            stacklevel=2,
        )
    start = np.asarray(theta0 if theta0 is not None else m.initial(f), dtype=float)
    eta0 = m.to_internal(start)
    starts = [eta0]
    rng = np.random.default_rng(config.seed)
    for _ in range(config.n_starts - 1):
        starts.append(eta0 * (1.0 + rng.uniform(-0.1, 0.1, size=eta0.shape)))

    fg = _objective(m, f, c)
    best = None
    for e0 in starts:
        res = bfgs(fg, e0, gtol=config.gtol, xtol=config.xtol, max_iter=config.max_iter)
        if not math.isfinite(res.fun):
            continue
        key = (not res.converged, res.fun)
        if best is None or key < (not best.converged, best.fun):
            best = res
    if best is None:
        raise NonConvergence("objective undefined at every starting value")

    theta = m.to_natural(best.x)
    grad = best.grad
    loss_value = float(best.fun)
    if math.isfinite(c):
        x = f / m.probs_and_grad(theta)[0]
        if np.any(np.abs(x - c) <= NEAR_KINK * c):
            refined = _semismooth_refine(m, theta, f, c)
            if refined is not theta:
                L, g_int = fg(m.to_internal(refined))
                if g_int is not None and np.max(np.abs(g_int)) <= np.max(np.abs(grad)):
                    theta, grad, loss_value = refined, g_int, L
    converged = best.converged or bool(np.max(np.abs(grad)) <= config.gtol)
    message = best.message if best.converged or not converged else best.message + "; gradient tolerance reached after refinement"
    p, _ = m.probs_and_grad(theta)
    x = f / p
    outcomes = m.outcomes()
    down = [outcomes[i] for i in np.flatnonzero(x > c)]
    result = FitResult(
        model=m,
        theta=theta,
        loss=loss_value,
        grad_norm=float(np.max(np.abs(grad))),
        converged=converged,
        iterations=best.iterations,
        message=message,
        probs=p,
        freqs=f,
        n=data.n,
        c=c,
        residuals=x,
        outcomes=outcomes,
        downweighted=down,
        at_kink=bool(math.isfinite(c) and np.any(np.abs(x - c) < KINK_TOL)),
        loss_history=list(best.history),
    )
    if not result.converged:
        err = NonConvergence(f"optimizer stopped without convergence: {message}")
        err.result = result
        raise err
    return result


def pearson_sample_corr(rows) -> float:
    """Product-moment correlation of two columns of integer codes."""
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidParameter("expected an (N, 2) array of paired codes")
    if len(arr) < 2:
        raise ZeroVariance("need at least two observations")
    d = arr - arr.mean(axis=0)
    vx, vy = d[:, 0] @ d[:, 0], d[:, 1] @ d[:, 1]
    if vx == 0 or vy == 0:
        raise ZeroVariance("a column has zero variance")
    return float(np.clip(d[:, 0] @ d[:, 1] / math.sqrt(vx * vy), -1.0, 1.0))
