"""Standard bivariate normal distribution function.

Gauss-Legendre quadrature of the Drezner-Wesolowsky single-integral form,
following Genz's BVNU algorithm, with a separate series-plus-quadrature
branch for ``|r| >= 0.925`` where the plain integrand becomes too peaked.
Vectorized over ``h``, ``k`` and ``r``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtr

_TWOPI = 2.0 * math.pi
# 20-point rule on [-1, 1]; accurate to double precision in every branch.
_X, _W = np.polynomial.legendre.leggauss(20)
# below this the difference formulas lose relative accuracy; switch to the tail integral
_TINY = 1e-10
_LOG_SQRT_TWOPI = 0.5 * math.log(_TWOPI)


def _bvnu_finite(h, k, r):
    """P(X > h, Y > k) for finite 1-d arrays h, k, r with |r| <= 1."""
    out = np.empty_like(h)
    hk = h * k
    small = np.abs(r) < 0.925

    if small.any():
        hs_ = h[small]
        ks_ = k[small]
        rs_ = r[small]
        hk_ = hk[small]
        asr = np.arcsin(rs_)
        hs = 0.5 * (hs_ * hs_ + ks_ * ks_)
        # integrate over theta in (0, asin r) with nodes mapped from [-1, 1]
        sn = np.sin(np.outer(asr, 0.5 * (1.0 + _X)))
        f = np.exp((sn * hk_[:, None] - hs[:, None]) / (1.0 - sn * sn))
        out[small] = (f @ _W) * asr / (2.0 * _TWOPI) + ndtr(-hs_) * ndtr(-ks_)

    big = ~small
    if big.any():
        hb = h[big]
        kb = k[big].copy()
        rb = r[big]
        hkb = hk[big].copy()
        neg = rb < 0
        kb[neg] = -kb[neg]
        hkb[neg] = -hkb[neg]
        bvn = np.zeros_like(hb)
        interior = np.abs(rb) < 1.0
        if interior.any():
            hi, ki, ri, hki = hb[interior], kb[interior], rb[interior], hkb[interior]
            as_ = (1.0 - ri) * (1.0 + ri)
            a = np.sqrt(as_)
            bs = (hi - ki) ** 2
            c = (4.0 - hki) / 8.0
            d = (12.0 - hki) / 16.0
            asr = -(bs / as_ + hki) / 2.0
            v = np.where(
                asr > -100.0,
                a * np.exp(np.maximum(asr, -100.0))
                * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0),
                0.0,
            )
            b = np.sqrt(bs)
            tail = np.where(
                -hki < 100.0,
                np.exp(np.minimum(-hki / 2.0, 50.0)) * math.sqrt(_TWOPI) * ndtr(-b / a)
                * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
                0.0,
            )
            v = v - tail
            a2 = a / 2.0
            xs = (a2[:, None] * (_X[None, :] + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            asr2 = -(bs[:, None] / xs + hki[:, None]) / 2.0
            term = np.exp(np.maximum(asr2, -100.0)) * (
                np.exp(-hki[:, None] * xs / (2.0 * (1.0 + rs) ** 2)) / rs
                - (1.0 + c[:, None] * xs * (1.0 + d[:, None] * xs))
            )
            term = np.where(asr2 > -100.0, term, 0.0)
            v = v + a2 * (term @ _W)
            bvn[interior] = -v / _TWOPI
        pos = ~neg
        bvn[pos] = bvn[pos] + ndtr(-np.maximum(hb[pos], kb[pos]))
        if neg.any():
            hn, kn, bn = hb[neg], kb[neg], bvn[neg]
            lower = np.where(hn < 0, ndtr(kn) - ndtr(hn), ndtr(-hn) - ndtr(-kn))
            bvn[neg] = np.where(hn >= kn, -bn, lower - bn)
        out[big] = bvn
    return out


def _tail_log_integrand(x, k, r, s):
    z = (k - r * x) / s
    return -0.5 * x * x - _LOG_SQRT_TWOPI + log_ndtr(z)


def _tail_slope(x, k, r, s):
    z = (k - r * x) / s
    mills = math.exp(-0.5 * z * z - _LOG_SQRT_TWOPI - float(log_ndtr(z)))
    return -x - (r / s) * mills


def _lower_orthant_small(h: float, k: float, r: float) -> float:
    """P(U <= h, V <= k) with full relative accuracy for tiny values.

    Integrates phi(x) Phi((k - r x) / s) over x <= h in log space. The log
    integrand is concave with curvature at most -1, so it decays at least as
    fast as a unit Gaussian away from its mode.
    """
    s = math.sqrt((1.0 - r) * (1.0 + r))
    if _tail_slope(h, k, r, s) >= 0.0:
        mode = h
    else:
        lo = h - 1.0
        while _tail_slope(lo, k, r, s) < 0.0:
            lo = h - 2.0 * (h - lo)
        mode = brentq(_tail_slope, lo, h, args=(k, r, s), xtol=1e-14, rtol=1e-14)
    peak = float(_tail_log_integrand(mode, k, r, s))
    # first panel width from the local curvature and boundary slope
    z = (k - r * mode) / s
    mills = math.exp(-0.5 * z * z - _LOG_SQRT_TWOPI - float(log_ndtr(z)))
    # mills * (z + mills) is one minus a truncated normal variance, so it lies in (0, 1);
    # the direct form cancels for very negative z, where 1 - 1/z^2 is accurate
    v = mills * (z + mills)
    if not 0.0 < v < 1.0:
        v = 1.0 - 1.0 / (z * z) if z < -1.0 else min(max(v, 1e-300), 1.0)
    curv = 1.0 + (r / s) ** 2 * v
    width = 1.0 / math.sqrt(curv)
    slope = abs(_tail_slope(mode, k, r, s))
    if slope > 0.0:
        width = min(width, 1.0 / slope)
    width *= 0.25
    total = 0.0
    for direction, limit in ((-1.0, 12.0), (1.0, min(12.0, h - mode))):
        a = 0.0
        step = width
        while a < limit:
            b = min(a + step, limit)
            t = 0.5 * (b - a) * (_X + 1.0) + a
            x = mode + direction * t
            vals = np.exp(_tail_log_integrand(x, k, r, s) - peak)
            total += 0.5 * (b - a) * float(vals @ _W)
            a = b
            step *= 2.0
    return math.exp(peak) * total


def bvn_cdf(h, k, r):
    """P(U <= h, V <= k) for a standard bivariate normal with correlation r.

    ``h`` and ``k`` may be infinite; ``|r| <= 1``.
    """
    scalar = np.ndim(h) == 0 and np.ndim(k) == 0 and np.ndim(r) == 0
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(r, dtype=float)
    )
    shape = h.shape
    h, k, r = h.ravel(), k.ravel(), r.ravel()
    if np.any(np.abs(r) > 1.0):
        raise ValueError("correlation must lie in [-1, 1]")
    out = np.empty(h.shape)
    lo = (h == -np.inf) | (k == -np.inf)
    hinf = (h == np.inf) & ~lo
    kinf = (k == np.inf) & ~lo & ~hinf
    fin = ~(lo | hinf | kinf)
    out[lo] = 0.0
    out[hinf] = ndtr(k[hinf])
    out[kinf] = ndtr(h[kinf])
    if fin.any():
        out[fin] = _bvnu_finite(-h[fin], -k[fin], r[fin])
        for i in np.flatnonzero(fin & (out < _TINY) & (np.abs(r) < 1.0)):
            out[i] = _lower_orthant_small(h[i], k[i], r[i])
    out = np.clip(out, 0.0, 1.0).reshape(shape)
    return float(out) if scalar else out


def bvn_pdf(h, k, r):
    """Standard bivariate normal density; zero when either argument is infinite."""
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(r, dtype=float)
    )
    fin = np.isfinite(h) & np.isfinite(k)
    hh = np.where(fin, h, 0.0)
    kk = np.where(fin, k, 0.0)
    one = 1.0 - r * r
    q = (hh * hh - 2.0 * r * hh * kk + kk * kk) / one
    return np.where(fin, np.exp(-0.5 * q) / (_TWOPI * np.sqrt(one)), 0.0)


def bvn_cdf_dh(h, k, r):
    """Partial derivative of :func:`bvn_cdf` in its first argument."""
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(r, dtype=float)
    )
    fin_h = np.isfinite(h)
    hh = np.where(fin_h, h, 0.0)
    s = np.sqrt(1.0 - r * r)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(np.isposinf(k), np.inf, np.where(np.isneginf(k), -np.inf, (k - r * hh) / s))
    dens = np.exp(-0.5 * hh * hh) / math.sqrt(_TWOPI)
    return np.where(fin_h, dens * ndtr(z), 0.0)
