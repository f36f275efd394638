"""Polychoric model for a pair of ordinal items.

Parameter vector ordering is ``(rho, a_1..a_{Jx-1}, b_1..b_{Jy-1})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ..bvn import bvn_cdf, bvn_cdf_dh, bvn_pdf
from ..errors import DegenerateMargin, InvalidParameter
from ..tables import ContingencyTable
from .base import CategoricalModel

RHO_MAX = 1.0 - 1e-9
THRESHOLD_CLAMP = 8.0
RHO_START_CLAMP = 0.95
MIN_START_GAP = 1e-2


@dataclass(frozen=True)
class PolychoricParams:
    rho: float
    a: tuple
    b: tuple

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.rho], self.a, self.b])

    @classmethod
    def from_vector(cls, theta, jx: int, jy: int) -> "PolychoricParams":
        theta = np.asarray(theta, dtype=float)
        return cls(float(theta[0]), tuple(theta[1:jx]), tuple(theta[jx:jx + jy - 1]))


def _cells(rho: float, a: np.ndarray, b: np.ndarray, with_grad: bool = True):
    """Rectangle probabilities (and gradients) for every cell of the table.

    Each cell lying mostly in the upper half of an axis is evaluated after
    reflecting that axis, so that small upper-tail cells are not obtained
    as differences of numbers close to one.
    """
    jx, jy = len(a) + 1, len(b) + 1
    A = np.concatenate([[-np.inf], a, [np.inf]])
    B = np.concatenate([[-np.inf], b, [np.inf]])
    ii, jj = np.meshgrid(np.arange(jx), np.arange(jy), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    lox, hix, loy, hiy = A[ii], A[ii + 1], B[jj], B[jj + 1]

    def upper(lo, hi):
        with np.errstate(invalid="ignore"):
            return np.where(np.isposinf(hi), np.isfinite(lo), np.where(np.isneginf(lo), False, lo + hi > 0))

    sx = np.where(upper(lox, hix), -1.0, 1.0)
    sy = np.where(upper(loy, hiy), -1.0, 1.0)
    Lx = np.where(sx > 0, lox, -hix)
    Hx = np.where(sx > 0, hix, -lox)
    Ly = np.where(sy > 0, loy, -hiy)
    Hy = np.where(sy > 0, hiy, -loy)
    r = rho * sx * sy

    hs = np.concatenate([Hx, Lx, Hx, Lx])
    ks = np.concatenate([Hy, Hy, Ly, Ly])
    rs = np.concatenate([r, r, r, r])
    F = bvn_cdf(hs, ks, rs).reshape(4, -1)
    p = F[0] - F[1] - F[2] + F[3]
    if not with_grad:
        return p, None

    m = len(p)
    d = 1 + (jx - 1) + (jy - 1)
    G = np.zeros((m, d))
    phi2 = bvn_pdf(hs, ks, rs).reshape(4, -1)
    G[:, 0] = (phi2[0] - phi2[1] - phi2[2] + phi2[3]) * sx * sy

    Fh = bvn_cdf_dh(hs, ks, rs).reshape(4, -1)
    Fk = bvn_cdf_dh(ks, hs, rs).reshape(4, -1)
    dHx = Fh[0] - Fh[2]
    dLx = -(Fh[1] - Fh[3])
    dHy = Fk[0] - Fk[1]
    dLy = -(Fk[2] - Fk[3])
    d_hix = np.where(sx > 0, dHx, -dLx)
    d_lox = np.where(sx > 0, dLx, -dHx)
    d_hiy = np.where(sy > 0, dHy, -dLy)
    d_loy = np.where(sy > 0, dLy, -dHy)

    rows = np.arange(m)
    # upper bound of row category i is threshold a_{i+1}, stored at column 1 + i
    k = ii < jx - 1
    G[rows[k], 1 + ii[k]] += d_hix[k]
    k = ii > 0
    G[rows[k], ii[k]] += d_lox[k]
    off = jx
    k = jj < jy - 1
    G[rows[k], off + jj[k]] += d_hiy[k]
    k = jj > 0
    G[rows[k], off + jj[k] - 1] += d_loy[k]
    return p, G


def cell_prob(params: PolychoricParams, x: int, y: int) -> float:
    """Probability of rating pair ``(x, y)``; categories are 1-based."""
    a, b = np.asarray(params.a, float), np.asarray(params.b, float)
    _check_cat(x, len(a) + 1)
    _check_cat(y, len(b) + 1)
    p, _ = _cells(params.rho, a, b, with_grad=False)
    return float(p[(x - 1) * (len(b) + 1) + (y - 1)])


def cell_grad(params: PolychoricParams, x: int, y: int) -> np.ndarray:
    """Gradient of :func:`cell_prob` with respect to ``(rho, a, b)``."""
    a, b = np.asarray(params.a, float), np.asarray(params.b, float)
    _check_cat(x, len(a) + 1)
    _check_cat(y, len(b) + 1)
    _, G = _cells(params.rho, a, b)
    return G[(x - 1) * (len(b) + 1) + (y - 1)].copy()


def _check_cat(x, j):
    if not 1 <= x <= j:
        raise InvalidParameter(f"category {x} outside 1..{j}")


def _start_thresholds(margin: np.ndarray) -> np.ndarray:
    cum = np.cumsum(margin)[:-1] / margin.sum()
    t = np.clip(ndtri(np.clip(cum, 0.0, 1.0)), -THRESHOLD_CLAMP, THRESHOLD_CLAMP)
    for i in range(1, len(t)):
        t[i] = max(t[i], t[i - 1] + MIN_START_GAP)
    return t


def initial_from_counts(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    mx, my = counts.sum(axis=1), counts.sum(axis=0)
    for name, m in (("first", mx), ("second", my)):
        if np.count_nonzero(m) < 2:
            raise DegenerateMargin(f"{name} variable has fewer than two observed categories")
    a, b = _start_thresholds(mx), _start_thresholds(my)
    n = counts.sum()
    xs = np.arange(1, counts.shape[0] + 1, dtype=float)
    ys = np.arange(1, counts.shape[1] + 1, dtype=float)
    ex, ey = mx @ xs / n, my @ ys / n
    vx = mx @ (xs - ex) ** 2 / n
    vy = my @ (ys - ey) ** 2 / n
    cov = (xs - ex) @ counts @ (ys - ey) / n
    r = float(np.clip(cov / math.sqrt(vx * vy), -RHO_START_CLAMP, RHO_START_CLAMP))
    return np.concatenate([[r], a, b])


def initial_params(table: ContingencyTable) -> PolychoricParams:
    """Two-step style starting values from marginal cumulative frequencies."""
    if table.arity != 2:
        raise InvalidParameter("polychoric model needs a two-way table")
    theta = initial_from_counts(table.counts)
    jx, jy = table.levels
    return PolychoricParams.from_vector(theta, jx, jy)


class PolychoricModel(CategoricalModel):
    def __init__(self, jx: int, jy: int):
        if jx < 2 or jy < 2:
            raise InvalidParameter("each item needs at least two categories")
        self.levels = (int(jx), int(jy))
        self.jx, self.jy = self.levels
        self.param_names = (
            ["rho"] + [f"a{i}" for i in range(1, jx)] + [f"b{j}" for j in range(1, jy)]
        )

    def split(self, theta):
        return theta[0], theta[1:self.jx], theta[self.jx:]

    def check_theta(self, theta):
        if theta.shape != (self.n_params,) or not np.all(np.isfinite(theta)):
            raise InvalidParameter("parameter vector has wrong length or non-finite entries")
        rho, a, b = self.split(theta)
        if abs(rho) > RHO_MAX:
            raise InvalidParameter(f"|rho| must be below 1, got {rho}")
        if np.any(np.diff(a) <= 0) or np.any(np.diff(b) <= 0):
            raise InvalidParameter("thresholds must be strictly increasing")
        return theta

    def _probs_grad(self, theta):
        rho, a, b = self.split(theta)
        return _cells(float(rho), a, b)

    def _to_int_block(self, t):
        return np.concatenate([[t[0]], np.log(np.diff(t))])

    def _to_nat_block(self, e):
        with np.errstate(over="ignore"):  # infinite gaps are rejected by check_theta
            return e[0] + np.concatenate([[0.0], np.cumsum(np.exp(e[1:]))])

    def to_internal(self, theta):
        rho, a, b = self.split(np.asarray(theta, float))
        return np.concatenate([[math.atanh(rho)], self._to_int_block(a), self._to_int_block(b)])

    def to_natural(self, eta):
        eta = np.asarray(eta, float)
        ea, eb = eta[1:self.jx], eta[self.jx:]
        return np.concatenate([[math.tanh(eta[0])], self._to_nat_block(ea), self._to_nat_block(eb)])

    def natural_jacobian(self, eta):
        eta = np.asarray(eta, float)
        J = np.zeros((self.n_params, self.n_params))
        J[0, 0] = 1.0 - math.tanh(eta[0]) ** 2
        for start, n in ((1, self.jx - 1), (self.jx, self.jy - 1)):
            e = eta[start:start + n]
            for t in range(n):
                J[start + t, start] = 1.0
                for s in range(1, t + 1):
                    J[start + t, start + s] = math.exp(e[s])
        return J

    def initial(self, freqs):
        return initial_from_counts(np.asarray(freqs, float).reshape(self.levels))
