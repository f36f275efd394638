"""Abstract parametric model over a finite, densely enumerated sample space."""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateProbability, HessianUnavailable, InvalidParameter, ZeroModelProbability

PROB_FLOOR = 1e-300


@dataclass
class ModelEval:
    """Probabilities and derivatives over the model's active cells.

    ``probs`` has shape ``(m,)``, ``grads`` ``(m, d)`` and ``hessians``
    (when requested) ``(m, d, d)``. Row ``i`` corresponds to
    ``model.outcomes()[i]``.
    """

    theta: np.ndarray
    probs: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray | None
    index: dict

    def row(self, z) -> int:
        try:
            return self.index[tuple(z)]
        except KeyError:
            raise InvalidParameter(f"outcome {tuple(z)} is not in the model's sample space") from None


class CategoricalModel(ABC):
    """Contract shared by every concrete model.

    The sample space is the cartesian product ``prod(levels)`` of 1-based
    category codes, enumerated in C order. ``mask`` selects the cells that
    enter the loss (all of them unless a model excludes uninformative ones).
    Parameters live in two coordinates: the natural ``theta`` that is
    reported, and an unconstrained ``eta`` used by the optimizer.
    """

    levels: tuple
    param_names: list

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def mask(self) -> np.ndarray:
        return np.ones(int(np.prod(self.levels)), dtype=bool)

    def outcomes(self) -> list:
        full = itertools.product(*(range(1, j + 1) for j in self.levels))
        return [z for z, keep in zip(full, self.mask) if keep]

    def index(self) -> dict:
        idx = getattr(self, "_index_cache", None)
        if idx is None:
            idx = {z: i for i, z in enumerate(self.outcomes())}
            self._index_cache = idx
        return idx

    # parameters -------------------------------------------------------

    @abstractmethod
    def check_theta(self, theta: np.ndarray) -> np.ndarray:
        """Validate natural parameters; raise InvalidParameter if outside Θ."""

    @abstractmethod
    def to_internal(self, theta: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def to_natural(self, eta: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def natural_jacobian(self, eta: np.ndarray) -> np.ndarray:
        """Matrix ``d theta / d eta`` evaluated at ``eta``."""

    @abstractmethod
    def initial(self, freqs: np.ndarray) -> np.ndarray:
        """Starting value (natural scale) from active-cell frequencies."""

    def bind(self, freqs: np.ndarray) -> "CategoricalModel":
        """Hook for models whose cell probabilities depend on observed margins."""
        return self

    # probabilities ----------------------------------------------------

    @abstractmethod
    def _probs_grad(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unchecked probabilities ``(m,)`` and gradients ``(m, d)``."""

    def _hessians(self, theta: np.ndarray) -> np.ndarray:
        """Second derivatives by central differences of the analytic gradient."""
        d = self.n_params
        eps = np.finfo(float).eps ** (1.0 / 3.0)
        out = np.empty((len(self.outcomes()), d, d))
        for j in range(d):
            h = eps * max(1.0, abs(theta[j]))
            tp = theta.copy()
            tm = theta.copy()
            tp[j] += h
            tm[j] -= h
            gp = self._probs_grad(tp)[1]
            gm = self._probs_grad(tm)[1]
            out[:, :, j] = (gp - gm) / (tp[j] - tm[j])
        return 0.5 * (out + out.transpose(0, 2, 1))

    def probs_and_grad(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = self.check_theta(np.asarray(theta, dtype=float))
        p, g = self._probs_grad(theta)
        if not np.all(p > PROB_FLOOR):
            raise DegenerateProbability("a model cell probability underflowed")
        return p, g

    def evaluate(self, theta, need_hessian: bool = False) -> ModelEval:
        theta = self.check_theta(np.asarray(theta, dtype=float))
        p, g = self.probs_and_grad(theta)
        hess = self._hessians(theta) if need_hessian else None
        return ModelEval(theta, p, g, hess, self.index())


def score_vector(ev: ModelEval, z) -> np.ndarray:
    """Gradient of ``log p_z`` at the evaluated parameter."""
    i = ev.row(z)
    if ev.probs[i] <= 0:
        raise ZeroModelProbability(f"p_z = 0 at {tuple(z)}")
    return ev.grads[i] / ev.probs[i]


def hessian_log(ev: ModelEval, z) -> np.ndarray:
    """Hessian of ``log p_z``: ``H_z / p_z - s_z s_z^T``."""
    if ev.hessians is None:
        raise HessianUnavailable("evaluate with need_hessian=True first")
    i = ev.row(z)
    s = score_vector(ev, z)
    q = ev.hessians[i] / ev.probs[i] - np.outer(s, s)
    return 0.5 * (q + q.T)


def scores(ev: ModelEval) -> np.ndarray:
    """All score vectors stacked, shape ``(m, d)``."""
    return ev.grads / ev.probs[:, None]


def log_hessians(ev: ModelEval) -> np.ndarray:
    """All ``Q_z`` stacked, shape ``(m, d, d)``."""
    if ev.hessians is None:
        raise HessianUnavailable("evaluate with need_hessian=True first")
    s = scores(ev)
    q = ev.hessians / ev.probs[:, None, None] - s[:, :, None] * s[:, None, :]
    return 0.5 * (q + q.transpose(0, 2, 1))
