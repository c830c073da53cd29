"""Truncated normal and gamma draws used by the Gibbs kernels.

Normal draws use the inverse CDF on whichever tail representation keeps
precision (reflecting intervals that sit in the upper tail), with an
exponential-rejection fallback once the CDF underflows (|bound| > ~37).
Gamma draws invert the regularized incomplete gamma on the truncated region.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammainc, gammaincc, gammaincinv, gammainccinv, ndtr, ndtri

_TAIL_SWITCH = 37.0  # beyond this ndtr underflows; use tail rejection


def _tail_rejection(rng, a, b):
    """Robert-style exponential rejection for a standard normal on (a, b), a >= _TAIL_SWITCH."""
    while True:
        z = a - math.log(rng.random()) / a
        if z <= b and rng.random() <= math.exp(-0.5 * (z - a) ** 2):
            return z


def truncated_normal(rng, mean, sd, lo, hi) -> float:
    """One draw from N(mean, sd^2) restricted to (lo, hi)."""
    if not lo < hi:
        raise ValueError(f"empty truncation interval ({lo}, {hi})")
    a = (lo - mean) / sd if np.isfinite(lo) else -np.inf
    b = (hi - mean) / sd if np.isfinite(hi) else np.inf
    if a >= 0.0:  # reflect upper-tail intervals into the lower tail
        return mean - sd * _std_lower(rng, -b, -a)
    return mean + sd * _std_lower(rng, a, b)


def _std_lower(rng, a, b):
    """Standard-normal draw on (a, b) with a < 0 or a = -inf."""
    if b <= -_TAIL_SWITCH:
        return -_tail_rejection(rng, -b, -a)
    pa = ndtr(a) if np.isfinite(a) else 0.0
    pb = ndtr(b) if np.isfinite(b) else 1.0
    u = pa + rng.random() * (pb - pa)
    u = min(max(u, 5e-324), 1.0 - 1e-16)
    return float(ndtri(u))


def truncated_normal_vec(rng, mean, sd, lo, hi) -> np.ndarray:
    """Vectorized truncated-normal draws; all arguments broadcast to one shape."""
    mean, sd, lo, hi = np.broadcast_arrays(
        np.asarray(mean, float), np.asarray(sd, float),
        np.asarray(lo, float), np.asarray(hi, float),
    )
    a = np.where(np.isfinite(lo), (lo - mean) / sd, -np.inf)
    b = np.where(np.isfinite(hi), (hi - mean) / sd, np.inf)
    flip = a >= 0.0
    a2 = np.where(flip, -b, a)
    b2 = np.where(flip, -a, b)
    pa = ndtr(a2)
    pb = ndtr(b2)
    u = pa + rng.random(a2.shape) * (pb - pa)
    u = np.clip(u, 5e-324, 1.0 - 1e-16)
    x = ndtri(u)
    x = np.where(flip, -x, x)
    out = mean + sd * x
    # extreme intervals where even the reflected CDF underflows: scalar fallback
    bad = ~np.isfinite(x) | (pb <= pa)
    if np.any(bad):
        idx = np.argwhere(bad)
        for ix in map(tuple, idx):
            out[ix] = truncated_normal(rng, mean[ix], sd[ix], lo[ix], hi[ix])
    return out


def truncated_gamma_lower(rng, shape, rate, lo) -> float:
    """Gamma(shape, rate) draw conditioned on x >= lo (rate parameterization)."""
    if lo <= 0:
        return rng.gamma(shape, 1.0 / rate)
    q = gammaincc(shape, rate * lo)
    if q <= 0.0:
        # constraint unreachably deep in the tail; tail is locally exponential
        return lo + rng.exponential(1.0 / rate)
    return float(gammainccinv(shape, rng.random() * q) / rate)


def truncated_gamma_upper(rng, shape, rate, hi) -> float:
    """Gamma(shape, rate) draw conditioned on x <= hi."""
    if not hi > 0:
        raise ValueError(f"empty truncation region (0, {hi}]")
    if not np.isfinite(hi):
        return rng.gamma(shape, 1.0 / rate)
    q = gammainc(shape, rate * hi)
    if q <= 0.0:
        # mass ~ x^(shape-1) near 0 when the bound is far below the bulk
        return float(hi * rng.random() ** (1.0 / shape))
    return float(gammaincinv(shape, rng.random() * q) / rate)
