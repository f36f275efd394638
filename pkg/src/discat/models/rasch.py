"""Conditional Rasch model for k binary items.

An outcome is a response pattern with codes ``1`` (wrong) or ``2``
(right), so ``x = code - 1``. Patterns with score 0 or k are uninformative
and excluded from the active cells. The joint cell probability is the
observed share of the pattern's score class times the conditional
probability of the pattern given its score; at ``c = inf`` this reproduces
the conditional likelihood.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientCells, InvalidParameter, ScoreMismatch
from .base import CategoricalModel

MAX_ITEMS = 20


def elementary_symmetric(e: np.ndarray) -> np.ndarray:
    """``gamma[s]`` = sum over size-s subsets of products of ``e``, s = 0..k."""
    g = np.zeros(len(e) + 1)
    g[0] = 1.0
    for j, v in enumerate(e):
        g[1:j + 2] = g[1:j + 2] + v * g[0:j + 1]
    return g


@dataclass(frozen=True)
class RaschSpec:
    k: int
    theta: tuple  # all k difficulties, theta[0] = 0 by convention


def rasch_prob(spec: RaschSpec, x, s: int) -> float:
    """Probability of pattern ``x`` (0/1 entries) given its score ``s``."""
    x = np.asarray(x, dtype=int)
    theta = np.asarray(spec.theta, dtype=float)
    if len(x) != spec.k or len(theta) != spec.k:
        raise InvalidParameter("pattern and difficulty vectors must have length k")
    if not 0 <= s <= spec.k or int(x.sum()) != s:
        raise ScoreMismatch(f"pattern sums to {int(x.sum())}, score given as {s}")
    shift = theta - theta.min()
    gamma = elementary_symmetric(np.exp(-shift))
    return float(np.exp(-x @ shift) / gamma[s])


class RaschModel(CategoricalModel):
    def __init__(self, k: int, score_weights: dict | None = None):
        if not 2 <= k <= MAX_ITEMS:
            raise InvalidParameter(f"Rasch model supports 2..{MAX_ITEMS} items, got {k}")
        self.k = int(k)
        self.levels = (2,) * self.k
        self.param_names = [f"theta{j}" for j in range(2, self.k + 1)]
        X = np.array(list(itertools.product((0, 1), repeat=self.k)), dtype=float)
        S = X.sum(axis=1).astype(int)
        if score_weights is None:
            score_weights = {s: 1.0 / (self.k - 1) for s in range(1, self.k)}
        self.score_weights = {int(s): float(w) for s, w in score_weights.items() if w > 0}
        keep = np.array([s in self.score_weights for s in S])
        self._mask = keep
        self.X = X[keep]
        self.S = S[keep]
        self.pi = np.array([self.score_weights[s] for s in self.S])

    @property
    def mask(self):
        return self._mask

    def bind(self, counts):
        counts = np.asarray(counts, dtype=float).ravel()
        X = np.array(list(itertools.product((0, 1), repeat=self.k)))
        S = X.sum(axis=1)
        tot = {s: counts[S == s].sum() for s in range(1, self.k)}
        n = sum(tot.values())
        if n == 0:
            raise InsufficientCells("no respondents with an informative score")
        return RaschModel(self.k, {s: v / n for s, v in tot.items() if v > 0})

    def full_theta(self, theta):
        return np.concatenate([[0.0], theta])

    def check_theta(self, theta):
        if theta.shape != (self.k - 1,) or not np.all(np.isfinite(theta)):
            raise InvalidParameter("expected k-1 finite difficulties")
        return theta

    def _probs_grad(self, theta):
        th = self.full_theta(theta)
        shift = th - th.min()
        e = np.exp(-shift)
        gamma = elementary_symmetric(e)
        cond = np.exp(-self.X @ shift) / gamma[self.S]
        p = self.pi * cond
        # d log gamma_s / d theta_j = -e_j gamma^{(j)}_{s-1} / gamma_s
        dlog = np.empty((len(p), self.k))
        for j in range(self.k):
            gj = elementary_symmetric(np.delete(e, j))
            dlog[:, j] = -self.X[:, j] + e[j] * gj[self.S - 1] / gamma[self.S]
        return p, p[:, None] * dlog[:, 1:]

    def to_internal(self, theta):
        return np.asarray(theta, float).copy()

    def to_natural(self, eta):
        return np.asarray(eta, float).copy()

    def natural_jacobian(self, eta):
        return np.eye(self.k - 1)

    def initial(self, freqs):
        # log-odds of item difficulty relative to item 1 from marginal success rates
        f = np.asarray(freqs, float)
        succ = np.clip(f @ self.X / f.sum(), 1e-3, 1 - 1e-3)
        logit = np.log((1 - succ) / succ)
        return logit[1:] - logit[0]
