"""Closed-form quantities of the per-step likelihood losses.

All functions treat the leave-one-out target as a constant and work with the
residual ``delta = r_tilde - mu``.
"""

import numpy as np

from . import normal
from .errors import ConvergenceError, DegenerateInputError, DomainError


def optimal_sigma_gaussian(delta):
    """Minimizer in sigma of ``log sigma + delta^2 / (2 sigma^2)``, i.e. ``|delta|``."""
    if delta == 0:
        raise DegenerateInputError("delta = 0: the loss is unbounded below as sigma -> 0")
    return abs(float(delta))


def _skew_fixed_point_map(sigma, delta, lam):
    gam = normal.mills_ratio(lam * delta / sigma)
    lg = lam * gam
    return delta * (-lg + np.sqrt(lg * lg + 4.0)) / 2.0


def optimal_sigma_skew(delta, lam, tol=1e-13, max_iter=200, damping=0.5):
    """Minimizer in sigma of the skew-normal per-step loss, for ``delta > 0``.

    Solves ``sigma = delta * (-lam*g + sqrt((lam*g)^2 + 4)) / 2`` with
    ``g = phi(lam*delta/sigma) / Phi(lam*delta/sigma)`` by damped fixed-point
    iteration started at ``sigma = delta``.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    delta = float(delta)
    if lam == 0:
        return delta
    sigma = delta
    for _ in range(max_iter):
        new = (1.0 - damping) * sigma + damping * _skew_fixed_point_map(sigma, delta, lam)
        if abs(new - sigma) < tol * max(1.0, delta):
            return float(new)
        sigma = new
    raise ConvergenceError(f"no convergence after {max_iter} iterations", sigma)


def analytic_grads_gaussian(delta, sigma):
    """``(d/dmu, d/dsigma)`` of ``log sigma + delta^2/(2 sigma^2)``."""
    return -delta / sigma**2, (sigma**2 - delta**2) / sigma**3


def analytic_grads_skew(delta, sigma, lam):
    """``(d/dmu, d/dsigma)`` of the skew-normal per-step loss."""
    gam = normal.mills_ratio(lam * delta / sigma)
    g_mu, g_sigma = analytic_grads_gaussian(delta, sigma)
    return g_mu + lam / sigma * gam, g_sigma + lam * delta / sigma**2 * gam


def skew_sigma_loss(sigma, delta, lam):
    """Skew-normal per-step loss as a function of sigma (constant dropped)."""
    return np.log(sigma) + delta**2 / (2.0 * sigma**2) - normal.log_cdf(lam * delta / sigma)
