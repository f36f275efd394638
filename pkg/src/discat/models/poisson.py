"""Stationary Poisson process observed as counts over disjoint periods.

Cell codes are ``count + 1``. Counts above ``zmax`` are folded into the top
cell so that every period's distribution still sums to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from ..errors import CountExceedsTruncation, InvalidParameter
from .base import CategoricalModel

LAMBDA_BOUNDS = (1e-10, 1e10)
ZMAX_MARGIN = 10


@dataclass(frozen=True)
class PoissonSpec:
    periods: tuple  # ((a_1, b_1), ...)
    zmax: int
    lam: float


def _lengths(periods) -> np.ndarray:
    periods = [tuple(map(float, p)) for p in periods]
    if not periods:
        raise InvalidParameter("at least one period is required")
    t = np.array([b - a for a, b in periods])
    if np.any(t <= 0):
        raise InvalidParameter("periods must have positive length")
    for (_, b0), (a1, _) in zip(periods, periods[1:]):
        if a1 < b0:
            raise InvalidParameter("periods must not overlap")
    return t


def _period_dist(mu: float, zmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Folded pmf over 0..zmax and its derivative in ``mu``."""
    n = np.arange(zmax + 1)
    q = poisson.pmf(n, mu)
    q[zmax] = poisson.sf(zmax - 1, mu)
    prev = np.concatenate([[0.0], poisson.pmf(n[:-1], mu)])
    dq = prev - poisson.pmf(n, mu)
    dq[zmax] = prev[zmax]
    return q, dq


def poisson_prob(spec: PoissonSpec, z) -> float:
    """Probability of count vector ``z`` (one count per period)."""
    t = _lengths(spec.periods)
    z = np.asarray(z, dtype=int)
    if len(z) != len(t):
        raise InvalidParameter("one count per period expected")
    if np.any(z < 0):
        raise InvalidParameter("counts must be nonnegative")
    if np.any(z > spec.zmax):
        raise CountExceedsTruncation(f"count {int(z.max())} exceeds truncation {spec.zmax}")
    logp = 0.0
    for n, tj in zip(z, t):
        mu = spec.lam * tj
        if n == spec.zmax:
            logp += float(poisson.logsf(n - 1, mu))
        else:
            logp += float(poisson.logpmf(n, mu))
    return math.exp(logp)


class PoissonModel(CategoricalModel):
    def __init__(self, periods, zmax: int):
        self.t = _lengths(periods)
        self.periods = tuple(tuple(map(float, p)) for p in periods)
        self.zmax = int(zmax)
        if self.zmax < 1:
            raise InvalidParameter("zmax must be at least 1")
        self.levels = (self.zmax + 1,) * len(self.t)
        self.param_names = ["lambda"]
        grid = np.indices(self.levels).reshape(len(self.t), -1).T
        self.counts_grid = grid

    @classmethod
    def for_counts(cls, periods, counts: np.ndarray) -> "PoissonModel":
        """Model with the default truncation ``max observed + 10``."""
        return cls(periods, int(np.max(counts)) + ZMAX_MARGIN)

    def check_theta(self, theta):
        if theta.shape != (1,) or not np.isfinite(theta[0]):
            raise InvalidParameter("expected a single finite intensity")
        lo, hi = LAMBDA_BOUNDS
        if not lo <= theta[0] <= hi:
            raise InvalidParameter(f"intensity must lie in [{lo}, {hi}]")
        return theta

    def _probs_grad(self, theta):
        lam = float(theta[0])
        p = np.ones(len(self.counts_grid))
        dlog = np.zeros(len(self.counts_grid))
        for j, tj in enumerate(self.t):
            q, dq = _period_dist(lam * tj, self.zmax)
            col = self.counts_grid[:, j]
            p *= q[col]
            with np.errstate(divide="ignore", invalid="ignore"):
                dlog += np.where(q[col] > 0, tj * dq[col] / q[col], 0.0)
        return p, (p * dlog)[:, None]

    def to_internal(self, theta):
        return np.log(np.asarray(theta, float))

    def to_natural(self, eta):
        return np.exp(np.asarray(eta, float))

    def natural_jacobian(self, eta):
        return np.array([[math.exp(float(eta[0]))]])

    def initial(self, freqs):
        f = np.asarray(freqs, float)
        mean_total = f @ self.counts_grid.sum(axis=1) / f.sum()
        return np.array([max(mean_total / self.t.sum(), 1e-3)])
