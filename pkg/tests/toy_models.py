"""Tiny models with closed-form answers, used only by the tests."""

import numpy as np
from scipy.special import expit, logit

from discat.errors import InvalidParameter
from discat.models.base import CategoricalModel


class Bernoulli(CategoricalModel):
    """Two cells with probabilities ``(pi, 1 - pi)``."""

    levels = (2,)
    param_names = ["pi"]

    def check_theta(self, theta):
        if theta.shape != (1,) or not 0 < theta[0] < 1:
            raise InvalidParameter("pi must lie in (0, 1)")
        return theta

    def to_internal(self, theta):
        return logit(np.asarray(theta, float))

    def to_natural(self, eta):
        return expit(np.asarray(eta, float))

    def natural_jacobian(self, eta):
        p = expit(eta[0])
        return np.array([[p * (1 - p)]])

    def initial(self, freqs):
        return np.array([0.5])

    def _probs_grad(self, theta):
        pi = theta[0]
        return np.array([pi, 1 - pi]), np.array([[1.0], [-1.0]])
