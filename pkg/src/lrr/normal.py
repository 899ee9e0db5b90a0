"""Numerically stable standard-normal helpers.

For negative arguments the CDF is written through the scaled complementary
error function, ``Phi(x) = erfcx(-x/sqrt2) * exp(-x**2/2) / 2``, so neither
``log Phi`` nor the inverse Mills ratio ``phi/Phi`` underflow far into the
left tail.
"""

import numpy as np
from scipy.special import erfc, erfcx

_SQRT2 = np.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def log_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * x * x - _LOG_SQRT_2PI


def pdf(x):
    return np.exp(log_pdf(x))


def cdf(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * erfc(-x / _SQRT2)


def log_cdf(x):
    """``log Phi(x)``, finite for every finite ``x``."""
    x = np.asarray(x, dtype=np.float64)
    neg = x < 0
    xn = np.where(neg, x, 0.0)
    xp = np.where(neg, 0.0, x)
    left = np.log(0.5 * erfcx(-xn / _SQRT2)) - 0.5 * xn * xn
    right = np.log1p(-0.5 * erfc(xp / _SQRT2))
    out = np.where(neg, left, right)
    return out[()] if out.ndim == 0 else out


def mills_ratio(x):
    """``phi(x) / Phi(x)``; behaves like ``-x`` as ``x -> -inf``."""
    x = np.asarray(x, dtype=np.float64)
    neg = x < 0
    xn = np.where(neg, x, 0.0)
    xp = np.where(neg, 0.0, x)
    left = _SQRT_2_OVER_PI / erfcx(-xn / _SQRT2)
    right = pdf(xp) / cdf(xp)
    out = np.where(neg, left, right)
    return out[()] if out.ndim == 0 else out
